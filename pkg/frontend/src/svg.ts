/**
 * Minimal deterministic SVG assembly: scales, paths, axes, legends.
 * No timestamps or random ids, so re-rendering the same data yields
 * byte-identical files.
 */

export interface Scale {
  (value: number): number
  readonly ticks: number[]
}

export function linearScale(domain: [number, number], range: [number, number], tickCount = 6): Scale {
  const [d0, d1] = domain
  const [r0, r1] = range
  const span = d1 - d0 || 1
  const fn = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale
  const step = niceStep(span / Math.max(tickCount, 1))
  const ticks: number[] = []
  for (let v = Math.ceil(d0 / step) * step; v <= d1 + 1e-9; v += step) {
    ticks.push(Number(v.toPrecision(12)))
  }
  Object.defineProperty(fn, 'ticks', { value: ticks })
  return fn
}

/** Log10 scale with ticks at every power of ten inside the domain. */
export function logScale(domain: [number, number], range: [number, number]): Scale {
  const d0 = Math.log10(Math.max(domain[0], 1e-12))
  const d1 = Math.log10(Math.max(domain[1], domain[0] + 1e-12))
  const [r0, r1] = range
  const span = d1 - d0 || 1
  const fn = ((value: number) =>
    r0 + ((Math.log10(Math.max(value, 1e-12)) - d0) / span) * (r1 - r0)) as Scale
  const ticks: number[] = []
  for (let p = Math.ceil(d0 - 1e-9); p <= Math.floor(d1 + 1e-9); p += 1) {
    ticks.push(10 ** p)
  }
  Object.defineProperty(fn, 'ticks', { value: ticks })
  return fn
}

function niceStep(raw: number): number {
  const power = 10 ** Math.floor(Math.log10(Math.max(raw, 1e-12)))
  const unit = raw / power
  if (unit <= 1) return power
  if (unit <= 2) return 2 * power
  if (unit <= 5) return 5 * power
  return 10 * power
}

const fmt = (x: number) => Number(x.toPrecision(8)).toString()

export function polylinePath(xs: number[], ys: number[]): string {
  return xs.map((x, i) => `${i === 0 ? 'M' : 'L'}${fmt(x)},${fmt(ys[i])}`).join('')
}

export function bandPath(xs: number[], upper: number[], lower: number[]): string {
  const forward = polylinePath(xs, upper)
  const backward = xs
    .map((x, i) => `L${fmt(x)},${fmt(lower[i])}`)
    .reverse()
    .join('')
  return `${forward}${backward}Z`
}

export const PALETTE = [
  '#1f77b4', '#d62728', '#2ca02c', '#ff7f0e', '#9467bd',
  '#8c564b', '#e377c2', '#7f7f7f', '#bcbd22', '#17becf',
  '#aec7e8', '#ffbb78', '#98df8a', '#ff9896',
]

export interface Margin {
  top: number
  right: number
  bottom: number
  left: number
}

export const DEFAULT_MARGIN: Margin = { top: 20, right: 20, bottom: 45, left: 70 }

export function svgDocument(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    '<rect width="100%" height="100%" fill="white"/>',
    ...body,
    '</svg>',
    '',
  ].join('\n')
}

export function xAxis(scale: Scale, y: number, x0: number, x1: number, log: boolean): string {
  const parts = [`<path d="M${fmt(x0)},${fmt(y)}L${fmt(x1)},${fmt(y)}" stroke="black" fill="none"/>`]
  for (const tick of scale.ticks) {
    const x = scale(tick)
    const label = log ? `1e${Math.round(Math.log10(tick))}` : fmt(tick)
    parts.push(`<path d="M${fmt(x)},${fmt(y)}L${fmt(x)},${fmt(y + 5)}" stroke="black"/>`)
    parts.push(
      `<text x="${fmt(x)}" y="${fmt(y + 18)}" text-anchor="middle" font-size="11">${label}</text>`,
    )
  }
  return parts.join('\n')
}

export function yAxis(scale: Scale, x: number, y0: number, y1: number): string {
  const parts = [`<path d="M${fmt(x)},${fmt(y0)}L${fmt(x)},${fmt(y1)}" stroke="black" fill="none"/>`]
  for (const tick of scale.ticks) {
    const y = scale(tick)
    parts.push(`<path d="M${fmt(x - 5)},${fmt(y)}L${fmt(x)},${fmt(y)}" stroke="black"/>`)
    parts.push(
      `<text x="${fmt(x - 8)}" y="${fmt(y + 4)}" text-anchor="end" font-size="11">${fmt(tick)}</text>`,
    )
  }
  return parts.join('\n')
}

export function legend(entries: { label: string; color: string; dash?: string }[], x: number, y: number): string {
  return entries
    .map((entry, i) => {
      const yy = y + i * 16
      const dash = entry.dash ? ` stroke-dasharray="${entry.dash}"` : ''
      return (
        `<path d="M${fmt(x)},${fmt(yy)}L${fmt(x + 22)},${fmt(yy)}" stroke="${entry.color}" stroke-width="2"${dash}/>` +
        `<text x="${fmt(x + 28)}" y="${fmt(yy + 4)}" font-size="11">${escapeXml(entry.label)}</text>`
      )
    })
    .join('\n')
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
}
