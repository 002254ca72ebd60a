import { describe, expect, it } from 'vitest'

import { applyEvent, cellPhase, greenCount, initGrid, orangeCount, resetGrid } from '../src/state'
import { RunDetail } from '../src/views/run'
import { SELECTED, fixtureRun } from './fixtures'

describe('token grid model', () => {
  it('starts with every selected token orange and none green', () => {
    const grid = initGrid(fixtureRun())
    expect(grid.cells).toHaveLength(12)
    expect(orangeCount(grid)).toBe(5)
    expect(greenCount(grid)).toBe(0)
  })

  it('ends with exactly the 5 selected cells green after all events', () => {
    const record = fixtureRun()
    let grid = initGrid(record)
    for (const event of record.events) grid = applyEvent(grid, event)
    expect(greenCount(grid)).toBe(5)
    expect(orangeCount(grid)).toBe(0)
    const greens = grid.cells.filter(c => cellPhase(c) === 'updated').map(c => c.position)
    expect(greens).toEqual(SELECTED)
  })

  it('never marks unselected tokens, even if an event names them', () => {
    const record = fixtureRun()
    let grid = initGrid(record)
    grid = applyEvent(grid, { layer: 1, indices: [1, 2, 3], timestamp: 0.001 })
    const unselected = grid.cells.find(c => c.position === 1)!
    expect(cellPhase(unselected)).toBe('idle')
    expect(grid.cells.find(c => c.position === 2)!.updatedAtLayer).toBe(1)
  })

  it('replay is idempotent', () => {
    const record = fixtureRun()
    const replay = () => {
      let grid = initGrid(record)
      for (const event of record.events) grid = applyEvent(grid, event)
      for (const event of record.events) grid = applyEvent(grid, event) // again
      return grid
    }
    const a = replay()
    const b = replay()
    expect(a).toEqual(b)
    expect(greenCount(resetGrid(a))).toBe(0)
  })

  it('tracks replay progress by layer', () => {
    const record = fixtureRun()
    let grid = initGrid(record)
    expect(grid.replayedLayer).toBe(0)
    grid = applyEvent(grid, record.events[0])
    expect(grid.replayedLayer).toBe(1)
    grid = applyEvent(grid, record.events[2])
    expect(grid.replayedLayer).toBe(3)
  })
})

describe('run detail view', () => {
  it('renders the grid and finishes replay with 5 green cells', () => {
    const view = new RunDetail()
    document.body.append(view.root)
    view.show(fixtureRun())
    expect(view.root.querySelectorAll('.cell')).toHaveLength(12)
    expect(view.root.querySelectorAll('.cell.pending')).toHaveLength(5)

    view.finishReplay()
    expect(view.root.querySelectorAll('.cell.updated')).toHaveLength(5)
    expect(view.root.querySelectorAll('.cell.pending')).toHaveLength(0)
    view.root.remove()
  })

  it('shows the comparison counters from the payload only', () => {
    const view = new RunDetail()
    document.body.append(view.root)
    view.show(fixtureRun())
    const text = view.root.querySelector('[data-role="counters"]')!.textContent!
    expect(text).toContain('5')        // computed tokens
    expect(text).toContain('12')       // full comp tokens
    expect(text).toContain('93.8%')    // token match, rendered not recomputed
    view.root.remove()
  })

  it('lists retrieved chunks with relevance scores', () => {
    const view = new RunDetail()
    document.body.append(view.root)
    view.show(fixtureRun())
    const entries = view.root.querySelectorAll('.retrieval-entry')
    expect(entries).toHaveLength(2)
    expect(entries[0].textContent).toContain('0.810')
    view.root.remove()
  })
})
