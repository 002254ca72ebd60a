// Run detail: retrieved chunks with relevance scores on the left, the token
// grid in the middle (orange = selected for recomputation, green = updated
// during replay), and the comparison counters plus pipeline timeline on the
// right. The Process button replays the per-layer events on the virtual
// schedule; speed is a client-side 1x..10x control.

import { getEvents } from '../api'
import { clear, el, shortId } from '../dom'
import { ReplayEngine } from '../replay'
import {
  GridModel, applyEvent, cellPhase, greenCount, initGrid, resetGrid,
} from '../state'
import { formatSeconds, timelineBars } from '../timeline'
import type { RunRecord } from '../types'

export class RunDetail {
  readonly root: HTMLElement
  grid: GridModel | null = null
  private record: RunRecord | null = null
  private retrievalPanel: HTMLElement
  private gridPanel: HTMLElement
  private sidePanel: HTMLElement
  private answerPanel: HTMLElement
  private progress: HTMLElement
  private speedSelect: HTMLSelectElement
  private replayer: ReplayEngine

  constructor() {
    this.retrievalPanel = el('div', { class: 'retrieval' })
    this.gridPanel = el('div', { class: 'token-grid', 'data-role': 'grid' })
    this.sidePanel = el('div', { class: 'run-side' })
    this.answerPanel = el('div', { class: 'answer', 'data-role': 'answer' })
    this.progress = el('div', { class: 'replay-progress', 'data-role': 'progress' })

    this.speedSelect = el('select', { 'data-role': 'speed' })
    for (const s of [1, 2, 4, 10]) {
      this.speedSelect.append(el('option', { value: String(s), text: `${s}x` }))
    }

    const processBtn = el('button', { text: 'Process', 'data-role': 'process' })
    processBtn.addEventListener('click', () => this.startReplay())

    this.replayer = new ReplayEngine(
      event => {
        if (this.grid) {
          this.grid = applyEvent(this.grid, event)
          this.renderGrid()
        }
      },
      () => this.renderProgress(true),
    )

    this.root = el('section', { class: 'panel run-detail hidden' }, [
      el('h2', { text: 'Run detail' }),
      el('div', { class: 'run-columns' }, [
        el('div', { class: 'run-left' }, [
          el('h3', { text: 'Retrieved chunks' }),
          this.retrievalPanel,
        ]),
        el('div', { class: 'run-center' }, [
          el('div', { class: 'replay-controls' }, [
            processBtn,
            el('label', { text: ' speed ' }, [this.speedSelect]),
            this.progress,
          ]),
          this.gridPanel,
          this.answerPanel,
        ]),
        this.sidePanel,
      ]),
    ])
  }

  show(record: RunRecord): void {
    this.record = record
    this.grid = initGrid(record)
    this.root.classList.remove('hidden')
    this.renderRetrieval()
    this.renderGrid()
    this.renderSide()
    this.renderAnswer()
    this.renderProgress(false)
  }

  startReplay(): void {
    if (!this.record || !this.grid) return
    // idempotent: always restart from the un-replayed grid
    this.grid = resetGrid(this.grid)
    this.renderGrid()
    this.renderProgress(false)
    const speed = Number(this.speedSelect.value)
    void getEvents(this.record.run_id)
      .then(res => this.replayer.start(res.events, speed))
      .catch(() => {
        // polling fallback: use the events embedded in the record
        if (this.record) this.replayer.start(this.record.events, speed)
      })
  }

  // apply every event at once (used when animation is unwanted)
  finishReplay(): void {
    if (!this.record || !this.grid) return
    this.grid = resetGrid(this.grid)
    this.replayer.finish(this.record.events)
  }

  private renderRetrieval(): void {
    clear(this.retrievalPanel)
    if (!this.record) return
    for (const entry of this.record.retrieval) {
      this.retrievalPanel.append(el('div', { class: 'retrieval-entry' }, [
        el('span', { class: 'mono', text: shortId(entry.chunk_id) }),
        el('span', { class: 'score', text: ` relevance ${entry.score.toFixed(3)}` }),
      ]))
    }
  }

  private renderGrid(): void {
    clear(this.gridPanel)
    if (!this.grid) return
    for (const cell of this.grid.cells) {
      const phase = cellPhase(cell)
      const node = el('span', {
        class: `cell ${phase}`,
        'data-pos': String(cell.position),
        title: `pos ${cell.position} · chunk ${shortId(cell.chunkId)} · score ${cell.score.toExponential(2)}`
          + (cell.updatedAtLayer ? ` · updated at layer ${cell.updatedAtLayer}` : ''),
        text: cell.text || '·',
      })
      this.gridPanel.append(node)
    }
  }

  private renderSide(): void {
    clear(this.sidePanel)
    if (!this.record) return
    const result = this.record.result
    const rows: [string, string][] = [
      ['policy', `${result.policy} @ ${result.ratio.toFixed(2)}`],
      ['computed tokens', String(result.selection.n_selected)],
      ['context tokens', String(this.record.tokens.length)],
      ['simulated TTFT', formatSeconds(result.ttft_sim)],
    ]
    if (this.record.comparison) {
      const c = this.record.comparison
      rows.push(
        ['full comp tokens', String(c.n_computed)],
        ['full comp TTFT', formatSeconds(c.ttft_sim)],
        ['token match', `${(c.token_match * 100).toFixed(1)}%`],
        ['logit divergence', c.logit_div.toExponential(2)],
      )
    }
    const table = el('table', { class: 'counters', 'data-role': 'counters' })
    for (const [k, v] of rows) {
      table.append(el('tr', {}, [el('td', { text: k }), el('td', { class: 'mono', text: v })]))
    }

    const timeline = el('div', { class: 'timeline', 'data-role': 'timeline' })
    for (const bar of timelineBars(result.schedule)) {
      const width = Math.max(0.4, (bar.x1 - bar.x0) * 100)
      timeline.append(el('div', {
        class: `bar ${bar.kind}`,
        style: `left:${(bar.x0 * 100).toFixed(2)}%;width:${width.toFixed(2)}%;`
          + `top:${bar.kind === 'fetch' ? 0 : 18}px;`,
        title: `layer ${bar.layer} ${bar.kind}`,
      }))
    }

    this.sidePanel.append(
      el('h3', { text: 'This run vs full computation' }),
      table,
      el('h3', { text: 'Pipeline timeline' }),
      el('div', { class: 'timeline-lanes' }, [
        el('span', { class: 'lane-label', text: 'fetch / compute' }), timeline,
      ]),
    )
  }

  private renderAnswer(): void {
    clear(this.answerPanel)
    if (!this.record) return
    this.answerPanel.append(
      el('h3', { text: 'Answer' }),
      el('pre', { text: this.record.result.answer_text || '(empty)' }),
    )
  }

  private renderProgress(done: boolean): void {
    if (!this.grid) return
    const applied = this.grid.replayedLayer
    this.progress.textContent = done
      ? `replay complete: ${greenCount(this.grid)} tokens updated`
      : applied
        ? `layer ${applied}/${this.grid.nLayers}`
        : 'ready'
  }
}
