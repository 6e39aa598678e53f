/**
 * Triangle parameter picker geometry. Coordinates: u is the blend axis
 * (0 = left apex), v the sensitivity axis (0 = top). The interior is
 * |v - 0.5| <= u/2 — a triangle with apex (0, 0.5) and right edge u = 1.
 * The sensitivity dimension is compressed toward the apex: at u = 0 the
 * blend is zero and sensitivity has no visual effect.
 */

import type {Rgb} from './blend'

export interface PickerPoint {
	u: number
	v: number
}

const EPS = 1e-9

export function insideTriangle(p: PickerPoint): boolean {
	return p.u >= 0 && p.u <= 1 && p.v >= 0 && p.v <= 1 && Math.abs(p.v - 0.5) <= p.u / 2 + EPS
}

function closestOnSegment(px: number, py: number, ax: number, ay: number, bx: number, by: number): [number, number] {
	const dx = bx - ax, dy = by - ay
	const t = Math.min(Math.max(((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy), 0), 1)
	return [ax + t * dx, ay + t * dy]
}

/** Nearest interior point to an arbitrary position (pointer clamp). */
export function clampToTriangle(u: number, v: number): PickerPoint {
	if (insideTriangle({u, v})) return {u, v}
	// vertices: apex (0, 0.5), top-right (1, 0), bottom-right (1, 1)
	const edges: Array<[number, number, number, number]> = [
		[0, 0.5, 1, 0],
		[0, 0.5, 1, 1],
		[1, 0, 1, 1],
	]
	let best: PickerPoint = {u: 0, v: 0.5}
	let bestD = Infinity
	for (const [ax, ay, bx, by] of edges) {
		const [cx, cy] = closestOnSegment(u, v, ax, ay, bx, by)
		const d = (u - cx) ** 2 + (v - cy) ** 2
		if (d < bestD) {
			bestD = d
			best = {u: cx, v: cy}
		}
	}
	return best
}

/**
 * Sensitivity fraction s (1 = most sensitive = smallest start level) to the
 * nearest available level; exact ties go to the more sensitive level.
 */
export function quantizeSensitivity(s: number, levels: readonly number[]): number {
	const sorted = [...levels].sort((a, b) => a - b)
	const n = sorted.length
	if (n === 1) return sorted[0]
	const x = (1 - s) * (n - 1)
	let idx = Math.floor(x + 0.5)
	if (idx > 0 && x + 0.5 === idx) idx -= 1
	return sorted[Math.min(idx, n - 1)]
}

export function pickerToParams(
	p: PickerPoint,
	levels: readonly number[],
	currentSensitivity?: number,
): {blend: number, sensitivity: number} {
	if (!insideTriangle(p)) throw new Error(`picker point (${p.u}, ${p.v}) outside the triangle`)
	const blend = p.u
	if (p.u <= 0) {
		const k = currentSensitivity ?? [...levels].sort((a, b) => a - b)[0]
		return {blend, sensitivity: k}
	}
	const s = Math.min(Math.max(0.5 - (p.v - 0.5) / p.u, 0), 1)
	return {blend, sensitivity: quantizeSensitivity(s, levels)}
}

export function paramsToPicker(blend: number, sensitivity: number, levels: readonly number[]): PickerPoint {
	const sorted = [...levels].sort((a, b) => a - b)
	const idx = sorted.indexOf(sensitivity)
	if (idx < 0) throw new Error(`sensitivity ${sensitivity} not in [${sorted}]`)
	const n = sorted.length
	const s = n === 1 ? 1 : 1 - idx / (n - 1)
	return {u: blend, v: 0.5 - (s - 0.5) * blend}
}

/**
 * Fill color at a picker position: background at the apex, blending toward
 * the right edge, which runs white (bottom) -> target (top).
 */
export function gradientColor(p: PickerPoint, background: Rgb, target: Rgb): Rgb {
	const s = p.u > 0 ? Math.min(Math.max(0.5 - (p.v - 0.5) / p.u, 0), 1) : 0
	const out: number[] = []
	for (let c = 0; c < 3; c++) {
		const edge = (1 - s) * 255 + s * target[c]
		out.push(Math.round((1 - p.u) * background[c] + p.u * edge))
	}
	return out as unknown as Rgb
}
