// Token grid model and the pure reducers the replay drives. Selected cells
// start "orange" (awaiting recomputation) and turn "green" as their layer
// update events replay; unselected cells stay neutral throughout.

import type { RunRecord, UpdateEvent } from './types'

export interface GridCell {
  position: number
  chunkId: string
  text: string
  selected: boolean
  score: number
  // highest layer whose update event has replayed over this cell, or null
  updatedAtLayer: number | null
}

export interface GridModel {
  cells: GridCell[]
  nLayers: number
  // replay progress: last layer whose event has been applied (0 = none)
  replayedLayer: number
}

export function initGrid(record: RunRecord): GridModel {
  return {
    cells: record.tokens.map(t => ({
      position: t.position,
      chunkId: t.chunk_id,
      text: t.text,
      selected: t.selected,
      score: t.score,
      updatedAtLayer: null,
    })),
    nLayers: record.result.schedule.layers.length,
    replayedLayer: 0,
  }
}

export function applyEvent(grid: GridModel, event: UpdateEvent): GridModel {
  const touched = new Set(event.indices)
  return {
    ...grid,
    replayedLayer: Math.max(grid.replayedLayer, event.layer),
    cells: grid.cells.map(cell =>
      touched.has(cell.position) && cell.selected
        ? { ...cell, updatedAtLayer: event.layer }
        : cell),
  }
}

export function resetGrid(grid: GridModel): GridModel {
  return {
    ...grid,
    replayedLayer: 0,
    cells: grid.cells.map(cell => ({ ...cell, updatedAtLayer: null })),
  }
}

export type CellPhase = 'idle' | 'pending' | 'updated'

// orange while its recomputation is still ahead, green once replayed
export function cellPhase(cell: GridCell): CellPhase {
  if (!cell.selected) return 'idle'
  return cell.updatedAtLayer === null ? 'pending' : 'updated'
}

export function greenCount(grid: GridModel): number {
  return grid.cells.filter(c => cellPhase(c) === 'updated').length
}

export function orangeCount(grid: GridModel): number {
  return grid.cells.filter(c => cellPhase(c) === 'pending').length
}
