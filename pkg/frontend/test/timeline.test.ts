import { describe, expect, it } from 'vitest'

import { fetchLaneIsSerialized, timelineBars } from '../src/timeline'
import { RunDetail } from '../src/views/run'
import { fixtureRun } from './fixtures'

describe('timeline layout', () => {
  it('renders one compute bar per layer (3 for the fixture)', () => {
    const bars = timelineBars(fixtureRun().result.schedule)
    expect(bars.filter(b => b.kind === 'compute')).toHaveLength(3)
    expect(bars.filter(b => b.kind === 'fetch')).toHaveLength(3)
  })

  it('keeps the fetch lane serialized', () => {
    const bars = timelineBars(fixtureRun().result.schedule)
    expect(fetchLaneIsSerialized(bars)).toBe(true)
  })

  it('skips zero-width fetch bars (FullCompute-style schedule)', () => {
    const schedule = {
      pre_phase: 0,
      ttft: 0.01,
      layers: [1, 2, 3].map(layer => ({
        layer,
        fetch_start: 0, fetch_end: 0,
        compute_start: (layer - 1) * 0.003, compute_end: layer * 0.003,
      })),
    }
    const bars = timelineBars(schedule)
    expect(bars.filter(b => b.kind === 'fetch')).toHaveLength(0)
    expect(bars.filter(b => b.kind === 'compute')).toHaveLength(3)
  })

  it('normalizes bar geometry into [0, 1]', () => {
    for (const bar of timelineBars(fixtureRun().result.schedule)) {
      expect(bar.x0).toBeGreaterThanOrEqual(0)
      expect(bar.x1).toBeLessThanOrEqual(1 + 1e-9)
      expect(bar.x1).toBeGreaterThanOrEqual(bar.x0)
    }
  })

  it('draws 3 compute bars in the DOM for the fixture run', () => {
    const view = new RunDetail()
    document.body.append(view.root)
    view.show(fixtureRun())
    expect(view.root.querySelectorAll('[data-role="timeline"] .bar.compute')).toHaveLength(3)
    view.root.remove()
  })
})
