import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest'

import { QueryConsole } from '../src/views/console'

function mockFetch() {
  let nextId = 1
  const calls: { url: string; body: Record<string, unknown> }[] = []
  const fn = vi.fn(async (url: string, init?: RequestInit) => {
    calls.push({ url, body: init?.body ? JSON.parse(init.body as string) : {} })
    return new Response(JSON.stringify({ run_id: nextId++ }), {
      status: 200, headers: { 'content-type': 'application/json' },
    })
  })
  return { fn, calls }
}

describe('query console', () => {
  let mock: ReturnType<typeof mockFetch>

  beforeEach(() => {
    mock = mockFetch()
    vi.stubGlobal('fetch', mock.fn)
  })

  afterEach(() => {
    vi.unstubAllGlobals()
  })

  function setup(onRun = vi.fn()) {
    const view = new QueryConsole(onRun)
    document.body.append(view.root)
    return { view, onRun }
  }

  function type(view: QueryConsole, text: string) {
    const input = view.root.querySelector<HTMLTextAreaElement>('[data-role="query"]')!
    input.value = text
  }

  it('policy and ratio changes trigger new runs', async () => {
    const { view, onRun } = setup()
    type(view, 'first question')
    await view.submit()

    const policy = view.root.querySelector<HTMLSelectElement>('[data-role="policy"]')!
    policy.value = 'CacheBlend'
    policy.dispatchEvent(new Event('change'))
    const ratio = view.root.querySelector<HTMLInputElement>('[data-role="ratio"]')!
    ratio.value = '0.45'
    ratio.dispatchEvent(new Event('input'))
    await view.submit()

    const queryCalls = mock.calls.filter(c => c.url === '/api/query')
    expect(queryCalls).toHaveLength(2)
    expect(queryCalls[0].body.policy).toBe('QCFuse')
    expect(queryCalls[0].body.ratio).toBe(0.2)
    expect(queryCalls[1].body.policy).toBe('CacheBlend')
    expect(queryCalls[1].body.ratio).toBe(0.45)
    expect(onRun).toHaveBeenCalledTimes(2)
    expect(view.root.querySelectorAll('.history-entry')).toHaveLength(2)
  })

  it('FullReuse pins the ratio slider to 0 and disables it', () => {
    const { view } = setup()
    const policy = view.root.querySelector<HTMLSelectElement>('[data-role="policy"]')!
    const ratio = view.root.querySelector<HTMLInputElement>('[data-role="ratio"]')!
    policy.value = 'FullReuse'
    policy.dispatchEvent(new Event('change'))
    expect(ratio.value).toBe('0')
    expect(ratio.disabled).toBe(true)

    policy.value = 'QCFuse'
    policy.dispatchEvent(new Event('change'))
    expect(ratio.disabled).toBe(false)
  })

  it('empty query never leaves the client', async () => {
    const { view, onRun } = setup()
    type(view, '   ')
    await view.submit()
    expect(mock.calls.filter(c => c.url === '/api/query')).toHaveLength(0)
    expect(onRun).not.toHaveBeenCalled()
    const validation = view.root.querySelector('[data-role="validation"]')!
    expect(validation.textContent).not.toBe('')
  })

  it('sends the compare toggle through', async () => {
    const { view } = setup()
    type(view, 'compare me')
    const compare = view.root.querySelector<HTMLInputElement>('[data-role="compare"]')!
    compare.checked = true
    await view.submit()
    expect(mock.calls.at(-1)!.body.compare_full).toBe(true)
  })
})
