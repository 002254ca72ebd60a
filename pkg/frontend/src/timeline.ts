// Pipeline timeline geometry from a run's schedule: fetch bars on one lane,
// compute bars on another, x-normalized to the schedule's total span. The
// single-channel invariant means fetch bars never overlap on their lane.

import type { Schedule } from './types'

export interface TimelineBar {
  kind: 'fetch' | 'compute'
  layer: number
  x0: number   // fraction of total span, [0, 1]
  x1: number
}

export function timelineBars(schedule: Schedule): TimelineBar[] {
  const span = Math.max(schedule.ttft, 1e-12)
  const bars: TimelineBar[] = []
  for (const layer of schedule.layers) {
    if (layer.fetch_end > layer.fetch_start) {
      bars.push({
        kind: 'fetch', layer: layer.layer,
        x0: layer.fetch_start / span, x1: layer.fetch_end / span,
      })
    }
    // compute bars always render, one per layer, even when beta-thin
    bars.push({
      kind: 'compute', layer: layer.layer,
      x0: layer.compute_start / span, x1: Math.max(layer.compute_end, layer.compute_start) / span,
    })
  }
  return bars
}

export function fetchLaneIsSerialized(bars: TimelineBar[]): boolean {
  const fetches = bars.filter(b => b.kind === 'fetch').sort((a, b) => a.x0 - b.x0)
  for (let i = 1; i < fetches.length; i++) {
    if (fetches[i].x0 < fetches[i - 1].x1 - 1e-12) return false
  }
  return true
}

export function formatSeconds(t: number): string {
  if (t >= 1) return `${t.toFixed(3)} s`
  return `${(t * 1000).toFixed(3)} ms`
}
