/** Typed client for the slide tile server's HTTP API. */

export interface StainMeta {
	name: string
	od_vector: number[]
	target_color: [number, number, number]
	background_color: [number, number, number]
	d_max: number
}

export interface SlideMeta {
	id: string
	width: number
	height: number
	tile_size: number
	levels: number
	stain: StainMeta
	start_levels: number[]
	drop_base: boolean
	fade_range: number
}

export interface RenderParams {
	level: number
	x: number
	y: number
	w: number
	h: number
	blend: number
	sens: number
}

export class SlideApi {
	constructor(readonly server: string, readonly slide: string) {}

	private url(path: string): string {
		return `${this.server}/api/slides/${this.slide}${path}`
	}

	async meta(): Promise<SlideMeta> {
		const r = await fetch(this.url(''))
		if (!r.ok) throw new Error(`meta fetch failed: ${r.status}`)
		return r.json()
	}

	originalTileUrl(level: number, x: number, y: number): string {
		return this.url(`/tiles/original/${level}/${x}/${y}`)
	}

	importanceTileUrl(k: number, level: number, x: number, y: number): string {
		return this.url(`/tiles/importance/${k}/${level}/${x}/${y}`)
	}

	renderUrl(p: RenderParams): string {
		const q = new URLSearchParams({
			level: String(p.level), x: String(p.x), y: String(p.y),
			w: String(p.w), h: String(p.h),
			blend: String(p.blend), sens: String(p.sens),
		})
		return this.url(`/render?${q}`)
	}

	async postEvents(session: string, body: string): Promise<void> {
		const r = await fetch(this.url(`/events?session=${encodeURIComponent(session)}`), {
			method: 'POST',
			body,
		})
		if (!r.ok) throw new Error(`event post failed: ${r.status}`)
	}
}
