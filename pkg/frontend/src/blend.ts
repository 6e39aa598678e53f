/**
 * Client-side copy of the normative blend math, so tiles stay cacheable
 * across parameter changes and compositing happens per fragment in the
 * browser. Must stay in numeric lockstep with the server's compositor:
 * parity is asserted against GET /render in the integration tests.
 */

export type Rgb = readonly [number, number, number]

/** Zoom-attenuated blend factor: blend scaled by clamp(level/fade, 0, 1). */
export function effectiveBlend(blend: number, displayLevel: number, fadeRange: number): number {
	if (fadeRange <= 0) throw new Error('fadeRange must be positive')
	return blend * Math.min(Math.max(displayLevel / fadeRange, 0), 1)
}

/** Importance-only rendering: white -> target color by density. */
export function importanceColor(d: number, target: Rgb): Rgb {
	return [0, 1, 2].map(c => Math.floor((1 - d) * 255 + d * target[c] + 0.5)) as unknown as Rgb
}

/**
 * One pixel of the blend law. b_eff <= 0.5 fades the original into the
 * density-alpha overlay; above 0.5 the overlay fades into importance-only.
 */
export function blendPixel(orig: Rgb, d: number, target: Rgb, bEff: number): Rgb {
	const out: number[] = []
	for (let c = 0; c < 3; c++) {
		const oc = orig[c]
		const t = target[c]
		const ov = d * t + (1 - d) * oc
		let v: number
		if (bEff <= 0.5) {
			const f = bEff * 2
			v = (1 - f) * oc + f * ov
		} else {
			const f = (bEff - 0.5) * 2
			const imp = (1 - d) * 255 + d * t
			v = (1 - f) * ov + f * imp
		}
		out.push(Math.floor(v + 0.5))
	}
	return out as unknown as Rgb
}

/**
 * Blend a whole fragment in place: rgba is RGBA pixel data (alpha untouched),
 * dens the matching density plane (one byte per pixel).
 */
export function compositeIntoRgba(
	rgba: Uint8ClampedArray | Uint8Array,
	dens: Uint8Array | Uint8ClampedArray,
	target: Rgb,
	bEff: number,
): void {
	if (bEff === 0) return
	const n = dens.length
	for (let i = 0; i < n; i++) {
		const d = dens[i] / 255
		const ov0 = d * target[0], ov1 = d * target[1], ov2 = d * target[2]
		const k = i * 4
		if (bEff <= 0.5) {
			const f = bEff * 2
			const g = 1 - f * d
			rgba[k] = Math.floor(g * rgba[k] + f * ov0 + 0.5)
			rgba[k + 1] = Math.floor(g * rgba[k + 1] + f * ov1 + 0.5)
			rgba[k + 2] = Math.floor(g * rgba[k + 2] + f * ov2 + 0.5)
		} else {
			const f = (bEff - 0.5) * 2
			const w = (1 - d) * 255
			const od = 1 - d
			rgba[k] = Math.floor((1 - f) * (ov0 + od * rgba[k]) + f * (w + ov0) + 0.5)
			rgba[k + 1] = Math.floor((1 - f) * (ov1 + od * rgba[k + 1]) + f * (w + ov1) + 0.5)
			rgba[k + 2] = Math.floor((1 - f) * (ov2 + od * rgba[k + 2]) + f * (w + ov2) + 0.5)
		}
	}
}
