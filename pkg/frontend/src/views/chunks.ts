// Chunk browser: everything cached in the store, with hash ids, previews,
// and anchor counts, plus the upload form that precomputes new context.

import { listChunks, uploadChunks } from '../api'
import { clear, el, shortId } from '../dom'
import type { ChunkSummary } from '../types'

export class ChunkBrowser {
  readonly root: HTMLElement
  private tableBody: HTMLElement
  private status: HTMLElement
  private empty: HTMLElement

  constructor() {
    this.tableBody = el('tbody')
    this.status = el('div', { class: 'status' })
    this.empty = el('p', { class: 'empty-state', text: 'No chunks cached yet. Upload a document to get started.' })

    const nameInput = el('input', { type: 'text', placeholder: 'document name', 'data-role': 'upload-name' })
    const textInput = el('textarea', { placeholder: 'paste context text…', 'data-role': 'upload-text' })
    const button = el('button', { text: 'Upload & precompute', 'data-role': 'upload-submit' })
    button.addEventListener('click', async () => {
      if (!textInput.value) {
        this.status.textContent = 'Nothing to upload: text is empty.'
        return
      }
      button.disabled = true
      try {
        const res = await uploadChunks(nameInput.value || 'pasted.txt', textInput.value)
        const hits = res.chunks.filter(c => c.cache_hit).length
        this.status.textContent =
          `Stored ${res.chunks.length} chunk(s), ${hits} already cached.`
        textInput.value = ''
        await this.refresh()
      } catch (err) {
        this.status.textContent = String(err)
      } finally {
        button.disabled = false
      }
    })

    this.root = el('section', { class: 'panel chunk-browser' }, [
      el('h2', { text: 'Context chunks' }),
      this.empty,
      el('table', {}, [
        el('thead', {}, [el('tr', {}, [
          el('th', { text: 'hash' }), el('th', { text: 'source' }),
          el('th', { text: 'tokens' }), el('th', { text: 'anchors' }),
          el('th', { text: 'preview' }),
        ])]),
        this.tableBody,
      ]),
      el('div', { class: 'upload-form' }, [nameInput, textInput, button]),
      this.status,
    ])
  }

  async refresh(): Promise<ChunkSummary[]> {
    const chunks = await listChunks()
    this.render(chunks)
    return chunks
  }

  render(chunks: ChunkSummary[]): void {
    clear(this.tableBody)
    this.empty.style.display = chunks.length ? 'none' : 'block'
    for (const c of chunks) {
      this.tableBody.append(el('tr', { class: 'chunk-row' }, [
        el('td', { class: 'mono', text: shortId(c.chunk_id), title: c.chunk_id }),
        el('td', { text: c.source_name }),
        el('td', { text: String(c.n_tokens) }),
        el('td', { text: String(c.anchor_count) }),
        el('td', { class: 'preview', text: c.preview.slice(0, 60) }),
      ]))
    }
  }
}
