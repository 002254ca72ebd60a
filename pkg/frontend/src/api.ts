import type { ChunkSummary, Metrics, RunRecord, UpdateEvent } from './types'

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail = res.statusText
    try {
      const body = await res.json()
      if (body && typeof body.detail === 'string') detail = body.detail
    } catch { /* body was not json */ }
    throw new Error(`${res.status}: ${detail}`)
  }
  return res.json() as Promise<T>
}

export function listChunks(): Promise<ChunkSummary[]> {
  return fetch('/api/chunks').then(r => asJson(r))
}

export function uploadChunks(name: string, text: string): Promise<{ chunks: ChunkSummary[] }> {
  return fetch('/api/chunks', {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify({ name, text }),
  }).then(r => asJson(r))
}

export interface QueryRequest {
  query: string
  policy: string
  ratio: number
  top_k?: number
  compare_full?: boolean
}

export function submitQuery(req: QueryRequest): Promise<{ run_id: number }> {
  return fetch('/api/query', {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify(req),
  }).then(r => asJson(r))
}

export function getRun(runId: number): Promise<RunRecord> {
  return fetch(`/api/runs/${runId}`).then(r => asJson(r))
}

// Polling fallback for the event list; the replay engine itself paces the
// animation from the virtual timestamps, so a plain GET is sufficient.
export function getEvents(runId: number): Promise<{ run_id: number; events: UpdateEvent[] }> {
  return fetch(`/api/runs/${runId}/events`).then(r => asJson(r))
}

export function getMetrics(): Promise<Metrics> {
  return fetch('/api/metrics').then(r => asJson(r))
}
