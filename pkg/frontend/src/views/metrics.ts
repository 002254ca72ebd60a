// Metrics drawer: mirrors /api/metrics verbatim.

import { getMetrics } from '../api'
import { clear, el } from '../dom'

export class MetricsDrawer {
  readonly root: HTMLElement
  private body: HTMLElement
  private open = false

  constructor() {
    this.body = el('div', { class: 'metrics-body hidden', 'data-role': 'metrics-body' })
    const toggle = el('button', { text: 'View Detailed Metrics', 'data-role': 'metrics-toggle' })
    toggle.addEventListener('click', () => void this.toggle())
    this.root = el('section', { class: 'panel metrics-drawer' }, [toggle, this.body])
  }

  async toggle(): Promise<void> {
    this.open = !this.open
    this.body.classList.toggle('hidden', !this.open)
    if (this.open) await this.refresh()
  }

  async refresh(): Promise<void> {
    const m = await getMetrics()
    clear(this.body)
    const table = el('table', { class: 'counters' })
    const rows: [string, string][] = [
      ['cache hits', String(m.cache_hits)],
      ['cache misses', String(m.cache_misses)],
      ['layers fetched', String(m.layers_fetched)],
      ['bytes fetched', String(m.bytes_fetched)],
      ['runs served', String(m.runs_served)],
      ['store bytes', String(m.store_bytes)],
      ['model', `${m.model.n_layers}L · ${m.model.n_heads}H · d${m.model.d_model} (toy, seed ${m.model.seed})`],
      ['config', m.config_fingerprint.slice(0, 16)],
    ]
    for (const [k, v] of rows) {
      table.append(el('tr', {}, [el('td', { text: k }), el('td', { class: 'mono', text: v })]))
    }
    this.body.append(table)
  }
}
