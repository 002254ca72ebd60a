// Replays per-layer update events on their virtual timestamps, scaled to
// wall-clock milliseconds with a user speed factor. Replaying twice from the
// same start state lands on the same final grid (the reducers are pure).

import type { UpdateEvent } from './types'

export const MS_PER_VIRTUAL_SECOND = 60_000

export interface ReplayStep {
  event: UpdateEvent
  delayMs: number
}

// Wall-clock delay before each event: proportional to the virtual-time gap
// since the previous one, divided by the speed multiplier (1x..10x).
export function replaySteps(events: UpdateEvent[], speed: number): ReplayStep[] {
  const steps: ReplayStep[] = []
  let previous = 0
  for (const event of events) {
    const gap = Math.max(0, event.timestamp - previous)
    steps.push({ event, delayMs: (gap * MS_PER_VIRTUAL_SECOND) / speed })
    previous = event.timestamp
  }
  return steps
}

export class ReplayEngine {
  private timer: ReturnType<typeof setTimeout> | null = null
  private queue: ReplayStep[] = []
  running = false

  constructor(
    private onEvent: (event: UpdateEvent) => void,
    private onDone: () => void,
  ) {}

  start(events: UpdateEvent[], speed: number): void {
    this.stop()
    this.queue = replaySteps(events, speed)
    this.running = true
    this.pump()
  }

  // apply everything immediately (also the no-timer path for tests)
  finish(events: UpdateEvent[]): void {
    this.stop()
    for (const event of events) this.onEvent(event)
    this.onDone()
  }

  stop(): void {
    if (this.timer !== null) clearTimeout(this.timer)
    this.timer = null
    this.queue = []
    this.running = false
  }

  private pump(): void {
    const step = this.queue.shift()
    if (!step) {
      this.running = false
      this.onDone()
      return
    }
    this.timer = setTimeout(() => {
      this.onEvent(step.event)
      this.pump()
    }, step.delayMs)
  }
}
