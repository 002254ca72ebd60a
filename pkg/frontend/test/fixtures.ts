// Synthetic run record: 3 pipeline layers, 12 context tokens, 5 selected.

import type { RunRecord } from '../src/types'

const CHUNK_A = 'a'.repeat(64)
const CHUNK_B = 'b'.repeat(64)

export const SELECTED = [2, 5, 6, 9, 11]

export function fixtureRun(): RunRecord {
  const selected = new Set(SELECTED)
  const tokens = Array.from({ length: 12 }, (_, i) => ({
    position: i + 1,
    chunk_id: i < 6 ? CHUNK_A : CHUNK_B,
    text: String.fromCharCode(97 + i),
    selected: selected.has(i + 1),
    score: (12 - i) / 100,
  }))
  const layers = [1, 2, 3].map(layer => ({
    layer,
    fetch_start: (layer - 1) * 0.002,
    fetch_end: layer * 0.002,
    compute_start: layer * 0.002,
    compute_end: layer * 0.002 + 0.003,
  }))
  return {
    run_id: 7,
    request: {
      query: 'which tokens matter?',
      policy: 'QCFuse',
      ratio: 0.42,
      top_k: 2,
      chunk_ids: [CHUNK_A, CHUNK_B],
      compare_full: true,
    },
    retrieval: [
      { chunk_id: CHUNK_A, score: 0.81 },
      { chunk_id: CHUNK_B, score: 0.44 },
    ],
    result: {
      policy: 'QCFuse',
      ratio: 0.42,
      answer_text: 'cdcd',
      answer_tokens: [99, 100, 99, 100],
      first_token_logits: Array.from({ length: 259 }, () => 0),
      selection: {
        policy: 'QCFuse',
        ratio: 0.42,
        n_selected: SELECTED.length,
        indices: [...SELECTED],
        scores: tokens.map(t => t.score),
      },
      schedule: { pre_phase: 0.001, ttft: 0.009 + 0.002, layers },
      ttft_sim: 0.012,
    },
    tokens,
    events: layers.map(l => ({
      layer: l.layer,
      indices: [...SELECTED],
      timestamp: l.compute_end,
    })),
    comparison: {
      ttft_sim: 0.03,
      n_computed: 12,
      token_match: 0.9375,
      logit_div: 0.021,
    },
  }
}
