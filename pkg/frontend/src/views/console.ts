// Query console: pick a policy and recomputation ratio, toggle the
// full-computation comparison, submit. FullReuse pins the ratio slider at 0
// and FullCompute at 1, mirroring the API's strict validation.

import { submitQuery } from '../api'
import { el } from '../dom'
import { POLICIES } from '../types'

export interface ConsoleEntry {
  runId: number
  policy: string
  ratio: number
  query: string
}

export class QueryConsole {
  readonly root: HTMLElement
  readonly history: ConsoleEntry[] = []
  private queryInput: HTMLTextAreaElement
  private policySelect: HTMLSelectElement
  private ratioSlider: HTMLInputElement
  private ratioLabel: HTMLElement
  private compareToggle: HTMLInputElement
  private validation: HTMLElement
  private historyList: HTMLElement

  constructor(private onRun: (entry: ConsoleEntry) => void) {
    this.queryInput = el('textarea', { placeholder: 'ask something about the cached context…', 'data-role': 'query' })
    this.policySelect = el('select', { 'data-role': 'policy' })
    for (const p of POLICIES) {
      this.policySelect.append(el('option', { value: p, text: p }))
    }
    this.policySelect.value = 'QCFuse'

    this.ratioSlider = el('input', {
      type: 'range', min: '0', max: '1', step: '0.05', value: '0.2',
      'data-role': 'ratio',
    })
    this.ratioLabel = el('span', { class: 'ratio-label', text: '0.20' })
    this.compareToggle = el('input', { type: 'checkbox', 'data-role': 'compare' })
    this.validation = el('div', { class: 'validation', 'data-role': 'validation' })
    this.historyList = el('ul', { class: 'history', 'data-role': 'history' })

    this.policySelect.addEventListener('change', () => this.applyPolicyConstraints())
    this.ratioSlider.addEventListener('input', () => {
      this.ratioLabel.textContent = Number(this.ratioSlider.value).toFixed(2)
    })

    const submit = el('button', { text: 'Run', 'data-role': 'submit' })
    submit.addEventListener('click', () => void this.submit())

    this.root = el('section', { class: 'panel query-console' }, [
      el('h2', { text: 'Query' }),
      this.queryInput,
      el('div', { class: 'controls' }, [
        el('label', { text: 'policy ' }, [this.policySelect]),
        el('label', { text: 'ratio ' }, [this.ratioSlider, this.ratioLabel]),
        el('label', { text: 'compare with full computation ' }, [this.compareToggle]),
        submit,
      ]),
      this.validation,
      el('h3', { text: 'Run history' }),
      this.historyList,
    ])
    this.applyPolicyConstraints()
  }

  applyPolicyConstraints(): void {
    const policy = this.policySelect.value
    if (policy === 'FullReuse') {
      this.ratioSlider.value = '0'
      this.ratioSlider.disabled = true
    } else if (policy === 'FullCompute') {
      this.ratioSlider.value = '1'
      this.ratioSlider.disabled = true
    } else {
      this.ratioSlider.disabled = false
    }
    this.ratioLabel.textContent = Number(this.ratioSlider.value).toFixed(2)
  }

  async submit(): Promise<void> {
    const query = this.queryInput.value.trim()
    if (!query) {
      this.validation.textContent = 'Enter a query first.'
      return
    }
    this.validation.textContent = ''
    const policy = this.policySelect.value
    const ratio = Number(this.ratioSlider.value)
    try {
      const { run_id } = await submitQuery({
        query, policy, ratio, compare_full: this.compareToggle.checked,
      })
      const entry: ConsoleEntry = { runId: run_id, policy, ratio, query }
      this.history.push(entry)
      this.historyList.append(el('li', {
        class: 'history-entry',
        text: `#${run_id} ${policy}@${ratio.toFixed(2)} — ${query.slice(0, 40)}`,
      }))
      this.onRun(entry)
    } catch (err) {
      this.validation.textContent = String(err)
    }
  }
}
