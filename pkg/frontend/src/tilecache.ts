/**
 * Bounded least-recently-used tile cache. Keys encode slide, tile kind,
 * sensitivity, level and position, so a hit can never hand back pixels for a
 * different slide or parameter set.
 */

export function tileKey(
	slide: string,
	kind: 'original' | 'importance',
	level: number,
	x: number,
	y: number,
	k?: number,
): string {
	return kind === 'importance'
		? `${slide}/importance/${k}/${level}/${x}/${y}`
		: `${slide}/original/${level}/${x}/${y}`
}

export class LruCache<V> {
	private map = new Map<string, V>()

	constructor(readonly capacity: number) {
		if (capacity < 1) throw new Error('capacity must be >= 1')
	}

	get size(): number {
		return this.map.size
	}

	get(key: string): V | undefined {
		const value = this.map.get(key)
		if (value !== undefined) {
			// refresh recency (Map preserves insertion order)
			this.map.delete(key)
			this.map.set(key, value)
		}
		return value
	}

	has(key: string): boolean {
		return this.map.has(key)
	}

	set(key: string, value: V): void {
		this.map.delete(key)
		this.map.set(key, value)
		while (this.map.size > this.capacity) {
			const oldest = this.map.keys().next().value as string
			this.map.delete(oldest)
		}
	}

	clear(): void {
		this.map.clear()
	}
}
