/**
 * Interaction logger: queues session events in order, coalesces bursts of
 * the same activity kind (100 ms debounce), and flushes batches to the
 * events endpoint every 2 s and on page hide. A failed flush keeps the
 * batch queued, so events are never reordered or dropped.
 */

export interface SessionEvent {
	t: number
	kind: string
	level?: number
	x?: number
	y?: number
	blend?: number
	sens?: number
}

export interface LoggerOptions {
	post: (body: string) => Promise<void>
	now?: () => number
	debounceMs?: number
	flushMs?: number
}

const DEBOUNCED = new Set(['pan', 'zoom', 'param'])

export class InteractionLogger {
	private queue: SessionEvent[] = []
	private readonly post: (body: string) => Promise<void>
	private readonly now: () => number
	private readonly debounceMs: number
	readonly flushMs: number
	private readonly epoch: number
	private timer: ReturnType<typeof setInterval> | undefined
	private flushing = false

	constructor(options: LoggerOptions) {
		this.post = options.post
		this.now = options.now ?? (() => Date.now())
		this.debounceMs = options.debounceMs ?? 100
		this.flushMs = options.flushMs ?? 2000
		this.epoch = this.now()
	}

	/** Queued, not-yet-flushed events (testing hook). */
	get pending(): readonly SessionEvent[] {
		return this.queue
	}

	record(kind: string, fields: Omit<SessionEvent, 't' | 'kind'> = {}): void {
		const event: SessionEvent = {t: this.now() - this.epoch, kind, ...fields}
		const last = this.queue[this.queue.length - 1]
		if (
			last && DEBOUNCED.has(kind) && last.kind === kind
			&& event.t - last.t < this.debounceMs
		) {
			this.queue[this.queue.length - 1] = event // coalesce the burst
			return
		}
		this.queue.push(event)
	}

	async flush(): Promise<boolean> {
		if (this.flushing || this.queue.length === 0) return true
		const batch = this.queue
		this.queue = []
		this.flushing = true
		try {
			await this.post(batch.map(e => JSON.stringify(e)).join('\n') + '\n')
			return true
		} catch {
			this.queue = batch.concat(this.queue) // retry later, order intact
			return false
		} finally {
			this.flushing = false
		}
	}

	start(): void {
		if (this.timer === undefined) {
			this.timer = setInterval(() => void this.flush(), this.flushMs)
		}
	}

	stop(): void {
		if (this.timer !== undefined) {
			clearInterval(this.timer)
			this.timer = undefined
		}
	}
}
