/**
 * Canvas slide viewer: pan/zoom over the original tile pyramid with the
 * enhancement overlay composited client-side per fragment. Fractional zoom
 * composites the two bracketing integer levels (each with its own blend
 * attenuation) and cross-fades between them; at level 0 the attenuation
 * reaches zero, so the unmodified image is always shown at full depth.
 */

import {SlideApi, SlideMeta} from './api'
import {Rgb, compositeIntoRgba, effectiveBlend} from './blend'
import {InteractionLogger} from './events'
import {PickerPoint, clampToTriangle, gradientColor, paramsToPicker, pickerToParams} from './picker'
import {LruCache, tileKey} from './tilecache'

interface Tile {
	state: 'loaded' | 'pending' | 'error'
	rgba?: ImageData     // original tiles
	dens?: Uint8Array    // importance tiles (single channel)
	width?: number
	height?: number
}

const MAX_IN_FLIGHT = 8
const MAX_RETRIES = 3
const CACHE_TILES = 512
const PICKER_SIZE = 180

export class Viewer {
	private meta!: SlideMeta
	private level = 0
	private x0 = 0 // viewport origin in floor(level) pixels
	private y0 = 0
	private blend = 0.5
	private sensitivity = 1
	private cache = new LruCache<Tile>(CACHE_TILES)
	private inFlight = 0
	private fetchQueue: Array<() => void> = []
	private drawQueued = false
	private readonly ctx: CanvasRenderingContext2D
	private readonly pickerCtx: CanvasRenderingContext2D
	private readonly scratch = document.createElement('canvas')

	constructor(
		private readonly canvas: HTMLCanvasElement,
		private readonly pickerCanvas: HTMLCanvasElement,
		private readonly api: SlideApi,
		private readonly logger: InteractionLogger,
	) {
		this.ctx = canvas.getContext('2d')!
		this.pickerCtx = pickerCanvas.getContext('2d')!
	}

	async start(): Promise<void> {
		this.meta = await this.api.meta()
		this.level = this.meta.levels - 1
		this.sensitivity = this.meta.start_levels[0]
		this.logger.record('open', {level: this.level})
		this.logger.start()
		this.bindInput()
		this.drawPicker()
		this.invalidate()
	}

	// --- input -------------------------------------------------------------

	private bindInput(): void {
		const c = this.canvas
		let drag: {x: number, y: number} | undefined
		c.style.touchAction = 'none'
		c.onpointerdown = ev => {
			drag = {x: ev.clientX, y: ev.clientY}
			c.setPointerCapture(ev.pointerId)
		}
		c.onpointermove = ev => {
			if (!drag) return
			this.panBy(drag.x - ev.clientX, drag.y - ev.clientY)
			drag = {x: ev.clientX, y: ev.clientY}
		}
		c.onpointerup = c.onpointercancel = () => { drag = undefined }
		c.onwheel = ev => {
			ev.preventDefault()
			this.zoomBy(ev.deltaY > 0 ? 0.25 : -0.25, ev.offsetX, ev.offsetY)
		}
		c.tabIndex = 0
		c.onkeydown = ev => {
			const step = 50
			if (ev.key === 'ArrowLeft') this.panBy(-step, 0)
			else if (ev.key === 'ArrowRight') this.panBy(step, 0)
			else if (ev.key === 'ArrowUp') this.panBy(0, -step)
			else if (ev.key === 'ArrowDown') this.panBy(0, step)
			else if (ev.key === '+' || ev.key === '=') this.zoomBy(-0.25, c.width / 2, c.height / 2)
			else if (ev.key === '-') this.zoomBy(0.25, c.width / 2, c.height / 2)
			else return
			ev.preventDefault()
		}
		document.addEventListener('visibilitychange', () => {
			if (document.visibilityState === 'hidden') void this.logger.flush()
		})
		this.bindPicker()
	}

	private panBy(dxScreen: number, dyScreen: number): void {
		const scale = this.screenScale()
		this.x0 += dxScreen / scale
		this.y0 += dyScreen / scale
		this.clampViewport()
		this.logger.record('pan', {x: Math.round(this.x0), y: Math.round(this.y0), level: this.level})
		this.invalidate()
	}

	private zoomBy(delta: number, anchorX: number, anchorY: number): void {
		const oldLo = Math.floor(this.level)
		const scale = this.screenScale()
		const slideX = (this.x0 + anchorX / scale) * 2 ** oldLo // level-0 coords
		const slideY = (this.y0 + anchorY / scale) * 2 ** oldLo
		this.level = Math.min(Math.max(this.level + delta, 0), this.meta.levels - 1)
		const lo = Math.floor(this.level)
		const newScale = this.screenScale()
		this.x0 = slideX / 2 ** lo - anchorX / newScale
		this.y0 = slideY / 2 ** lo - anchorY / newScale
		this.clampViewport()
		this.logger.record('zoom', {level: this.level})
		this.invalidate()
	}

	private bindPicker(): void {
		const pc = this.pickerCanvas
		const update = (ev: PointerEvent) => {
			const p = clampToTriangle(ev.offsetX / PICKER_SIZE, ev.offsetY / PICKER_SIZE)
			const {blend, sensitivity} = pickerToParams(p, this.meta.start_levels, this.sensitivity)
			this.blend = blend
			this.sensitivity = sensitivity
			this.logger.record('param', {blend, sens: sensitivity, level: this.level})
			this.drawPicker()
			this.invalidate()
		}
		let down = false
		pc.onpointerdown = ev => { down = true; pc.setPointerCapture(ev.pointerId); update(ev) }
		pc.onpointermove = ev => { if (down) update(ev) }
		pc.onpointerup = pc.onpointercancel = () => { down = false }
	}

	// --- geometry ----------------------------------------------------------

	private screenScale(): number {
		// screen pixels per floor(level) pixel
		return 2 ** (Math.floor(this.level) - this.level)
	}

	private levelSize(level: number): [number, number] {
		let w = this.meta.width, h = this.meta.height
		for (let i = 0; i < level; i++) {
			w = Math.ceil(w / 2)
			h = Math.ceil(h / 2)
		}
		return [w, h]
	}

	private clampViewport(): void {
		const [lw, lh] = this.levelSize(Math.floor(this.level))
		const scale = this.screenScale()
		this.x0 = Math.min(Math.max(this.x0, 0), Math.max(lw - this.canvas.width / scale, 0))
		this.y0 = Math.min(Math.max(this.y0, 0), Math.max(lh - this.canvas.height / scale, 0))
	}

	// --- tiles -------------------------------------------------------------

	private tile(kind: 'original' | 'importance', level: number, x: number, y: number): Tile {
		const key = tileKey(this.meta.id, kind, level, x, y, this.sensitivity)
		let tile = this.cache.get(key)
		if (tile) return tile
		tile = {state: 'pending'}
		this.cache.set(key, tile)
		this.enqueueFetch(key, kind, level, x, y, this.sensitivity, 0)
		return tile
	}

	private enqueueFetch(
		key: string, kind: 'original' | 'importance',
		level: number, x: number, y: number, k: number, attempt: number,
	): void {
		const run = () => {
			this.inFlight++
			void this.fetchTile(kind, level, x, y, k)
				.then(tile => { this.cache.set(key, tile) })
				.catch(() => {
					if (attempt + 1 < MAX_RETRIES) {
						setTimeout(
							() => this.enqueueFetch(key, kind, level, x, y, k, attempt + 1),
							250 * 2 ** attempt,
						)
					} else {
						this.cache.set(key, {state: 'error'})
					}
				})
				.finally(() => {
					this.inFlight--
					this.fetchQueue.shift()?.()
					this.invalidate()
				})
		}
		if (this.inFlight < MAX_IN_FLIGHT) run()
		else this.fetchQueue.push(run)
	}

	private async fetchTile(
		kind: 'original' | 'importance', level: number, x: number, y: number, k: number,
	): Promise<Tile> {
		const url = kind === 'original'
			? this.api.originalTileUrl(level, x, y)
			: this.api.importanceTileUrl(k, level, x, y)
		const r = await fetch(url)
		if (!r.ok) throw new Error(`tile fetch ${r.status}`)
		const bitmap = await createImageBitmap(await r.blob())
		this.scratch.width = bitmap.width
		this.scratch.height = bitmap.height
		const sctx = this.scratch.getContext('2d', {willReadFrequently: true})!
		sctx.drawImage(bitmap, 0, 0)
		const data = sctx.getImageData(0, 0, bitmap.width, bitmap.height)
		if (kind === 'original') {
			return {state: 'loaded', rgba: data, width: bitmap.width, height: bitmap.height}
		}
		const dens = new Uint8Array(bitmap.width * bitmap.height)
		for (let i = 0; i < dens.length; i++) dens[i] = data.data[i * 4]
		return {state: 'loaded', dens, width: bitmap.width, height: bitmap.height}
	}

	// --- drawing -----------------------------------------------------------

	invalidate(): void {
		if (this.drawQueued) return
		this.drawQueued = true
		requestAnimationFrame(() => {
			this.drawQueued = false
			this.draw()
		})
	}

	private draw(): void {
		const lo = Math.floor(this.level)
		const frac = this.level - lo
		const scale = this.screenScale()
		const w = Math.ceil(this.canvas.width / scale)
		const h = Math.ceil(this.canvas.height / scale)
		this.ctx.imageSmoothingEnabled = false
		this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height)
		this.ctx.globalAlpha = 1
		this.drawLayer(lo, this.x0, this.y0, w, h, scale)
		if (frac > 0 && lo + 1 < this.meta.levels) {
			this.ctx.globalAlpha = frac
			this.drawLayer(lo + 1, this.x0 / 2, this.y0 / 2, Math.ceil(w / 2), Math.ceil(h / 2), scale * 2)
			this.ctx.globalAlpha = 1
		}
	}

	private drawLayer(level: number, x0: number, y0: number, w: number, h: number, scale: number): void {
		const ts = this.meta.tile_size
		const [lw, lh] = this.levelSize(level)
		const bEff = effectiveBlend(this.blend, level, this.meta.fade_range)
		const target = this.meta.stain.target_color as Rgb
		const layer = document.createElement('canvas')
		layer.width = Math.min(w, lw)
		layer.height = Math.min(h, lh)
		const lctx = layer.getContext('2d')!
		for (let ty = Math.floor(y0 / ts); ty * ts < Math.min(y0 + h, lh); ty++) {
			for (let tx = Math.floor(x0 / ts); tx * ts < Math.min(x0 + w, lw); tx++) {
				if (tx < 0 || ty < 0) continue
				const orig = this.tile('original', level, tx, ty)
				const ox = tx * ts - Math.floor(x0)
				const oy = ty * ts - Math.floor(y0)
				if (orig.state === 'error') {
					lctx.fillStyle = '#a33'
					lctx.fillRect(ox, oy, ts, ts)
					continue
				}
				if (orig.state !== 'loaded' || !orig.rgba) {
					lctx.fillStyle = '#ddd'
					lctx.fillRect(ox, oy, ts, ts)
					continue
				}
				let pixels = orig.rgba
				if (bEff > 0) {
					const imp = this.tile('importance', level, tx, ty)
					if (imp.state === 'loaded' && imp.dens) {
						pixels = new ImageData(
							new Uint8ClampedArray(orig.rgba.data), orig.rgba.width, orig.rgba.height,
						)
						compositeIntoRgba(pixels.data, imp.dens, target, bEff)
					}
					// importance tile still loading: show the original meanwhile
				}
				lctx.putImageData(pixels, ox, oy)
			}
		}
		this.ctx.drawImage(
			layer,
			0, 0, layer.width, layer.height,
			0, 0, layer.width * scale, layer.height * scale,
		)
	}

	private drawPicker(): void {
		const n = PICKER_SIZE
		this.pickerCanvas.width = this.pickerCanvas.height = n
		const img = this.pickerCtx.createImageData(n, n)
		const bg = this.meta.stain.background_color as Rgb
		const target = this.meta.stain.target_color as Rgb
		for (let py = 0; py < n; py++) {
			for (let px = 0; px < n; px++) {
				const p: PickerPoint = {u: px / (n - 1), v: py / (n - 1)}
				const i = (py * n + px) * 4
				if (Math.abs(p.v - 0.5) <= p.u / 2) {
					const [r, g, b] = gradientColor(p, bg, target)
					img.data[i] = r
					img.data[i + 1] = g
					img.data[i + 2] = b
					img.data[i + 3] = 255
				}
			}
		}
		this.pickerCtx.putImageData(img, 0, 0)
		const pos = paramsToPicker(this.blend, this.sensitivity, this.meta.start_levels)
		this.pickerCtx.strokeStyle = '#000'
		this.pickerCtx.beginPath()
		this.pickerCtx.arc(pos.u * (n - 1), pos.v * (n - 1), 5, 0, Math.PI * 2)
		this.pickerCtx.stroke()
	}
}
