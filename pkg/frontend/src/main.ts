import { getRun } from './api'
import { el } from './dom'
import { ChunkBrowser } from './views/chunks'
import { QueryConsole } from './views/console'
import { MetricsDrawer } from './views/metrics'
import { RunDetail } from './views/run'
import './style.css'

export function mountApp(root: HTMLElement): { console: QueryConsole; detail: RunDetail } {
  const detail = new RunDetail()
  const browser = new ChunkBrowser()
  const metrics = new MetricsDrawer()

  const qconsole = new QueryConsole(async entry => {
    const record = await getRun(entry.runId)
    detail.show(record)
    detail.startReplay()
  })

  root.append(
    el('header', {}, [
      el('h1', { text: 'qcfuse console' }),
      el('p', {
        class: 'tagline',
        text: 'chunk-level KV reuse with query-centric selective recomputation',
      }),
    ]),
    el('main', {}, [
      el('div', { class: 'column left' }, [browser.root, metrics.root]),
      el('div', { class: 'column right' }, [qconsole.root, detail.root]),
    ]),
  )
  void browser.refresh().catch(() => { /* server not up yet */ })
  return { console: qconsole, detail }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  mountApp(document.getElementById('app')!)
}
