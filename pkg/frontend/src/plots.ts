/**
 * The three figure kinds rendered from experiment CSVs.
 *
 * Every renderer returns the plotted arrays alongside the SVG so tests can
 * assert that what is drawn equals what the CSV says (no smoothing, no
 * recomputation of statistics beyond reading columns).
 */

import { SummaryRow, TraceRow, policyOrder } from './csv'
import {
  DEFAULT_MARGIN, PALETTE, Scale, bandPath, escapeXml, legend, linearScale,
  logScale, polylinePath, svgDocument, xAxis, yAxis,
} from './svg'

export interface StyleMap {
  [label: string]: { color?: string; dash?: string }
}

export interface CurveSeries {
  policy: string
  t: number[]
  mean: number[]
  std: number[]
  color: string
  dash?: string
}

export interface CurvesResult {
  svg: string
  series: CurveSeries[]
  xTicks: number[]
}

export interface BoxStats {
  policy: string
  finals: number[]
  median: number
  q25: number
  q75: number
  lo: number
  hi: number
}

export interface BoxplotResult {
  svg: string
  boxes: BoxStats[]
  warnings: string[]
}

const WIDTH = 840
const HEIGHT = 520

function groupSummary(rows: SummaryRow[]): Map<string, SummaryRow[]> {
  const groups = new Map<string, SummaryRow[]>()
  for (const row of rows) {
    const bucket = groups.get(row.policy) ?? []
    bucket.push(row)
    groups.set(row.policy, bucket)
  }
  for (const bucket of groups.values()) bucket.sort((a, b) => a.t - b.t)
  return groups
}

function drawCurves(rows: SummaryRow[], styles: StyleMap): CurvesResult {
  if (rows.length === 0) throw new Error('summary has no rows')
  const groups = groupSummary(rows)
  const order = policyOrder(rows)

  const allT = rows.map((r) => r.t)
  const yMax = Math.max(...rows.map((r) => r.mean + r.std), 1e-9)
  const m = DEFAULT_MARGIN
  const x = logScale([Math.max(Math.min(...allT), 1), Math.max(...allT)], [m.left, WIDTH - m.right])
  const y = linearScale([0, yMax], [HEIGHT - m.bottom, m.top])

  const body: string[] = []
  const series: CurveSeries[] = []
  order.forEach((policy, index) => {
    const bucket = groups.get(policy)!
    const style = styles[policy] ?? {}
    const color = style.color ?? PALETTE[index % PALETTE.length]
    const ts = bucket.map((r) => r.t)
    const means = bucket.map((r) => r.mean)
    const stds = bucket.map((r) => r.std)
    const xs = ts.map(x)
    const upper = bucket.map((r) => y(r.mean + r.std))
    const lower = bucket.map((r) => y(Math.max(r.mean - r.std, 0)))
    body.push(`<path d="${bandPath(xs, upper, lower)}" fill="${color}" opacity="0.15" stroke="none"/>`)
    const dash = style.dash ? ` stroke-dasharray="${style.dash}"` : ''
    body.push(
      `<path d="${polylinePath(xs, means.map(y))}" stroke="${color}" stroke-width="1.8" fill="none"${dash}/>`,
    )
    series.push({ policy, t: ts, mean: means, std: stds, color, dash: style.dash })
  })

  body.push(xAxis(x, HEIGHT - m.bottom, m.left, WIDTH - m.right, true))
  body.push(yAxis(y, m.left, HEIGHT - m.bottom, m.top))
  body.push(
    `<text x="${(m.left + WIDTH - m.right) / 2}" y="${HEIGHT - 8}" text-anchor="middle" font-size="12">time-stamp</text>`,
  )
  body.push(
    `<text x="16" y="${(m.top + HEIGHT - m.bottom) / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${(m.top + HEIGHT - m.bottom) / 2})">cumulative regret</text>`,
  )
  body.push(legend(series.map((s) => ({ label: s.policy, color: s.color, dash: s.dash })), m.left + 10, m.top + 10))

  return { svg: svgDocument(WIDTH, HEIGHT, body), series, xTicks: x.ticks }
}

/** Mean regret vs time, log-scaled x, one curve per policy with a ±1 std band. */
export function plotRegretCurves(rows: SummaryRow[], styles: StyleMap = {}): CurvesResult {
  return drawCurves(rows, styles)
}

/**
 * Hyper-parameter study: same axes as the regret curves, but line style is
 * derived from each label's (c, m) pair: color tracks c, dashing tracks m.
 */
export function plotHyperparamGrid(rows: SummaryRow[], styles: StyleMap = {}): CurvesResult {
  const order = policyOrder(rows)
  const cs: number[] = []
  const derived: StyleMap = {}
  for (const label of order) {
    const match = /c=([0-9.e+-]+),m=([0-9]+)/.exec(label)
    if (!match) continue
    const c = Number(match[1])
    if (!cs.includes(c)) cs.push(c)
    derived[label] = {
      color: PALETTE[cs.indexOf(c) % PALETTE.length],
      dash: Number(match[2]) > 1 ? '6,3' : undefined,
    }
  }
  return drawCurves(rows, { ...derived, ...styles })
}

function quantile(sorted: number[], q: number): number {
  if (sorted.length === 1) return sorted[0]
  const pos = q * (sorted.length - 1)
  const lo = Math.floor(pos)
  const hi = Math.ceil(pos)
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo)
}

/**
 * Distribution of final-checkpoint regret per policy: box between quartiles,
 * median line, whiskers spanning the full sample range.
 */
export function plotFinalRegretBoxplot(rows: TraceRow[], styles: StyleMap = {}): BoxplotResult {
  if (rows.length === 0) throw new Error('trace file has no rows')
  const finalT = Math.max(...rows.map((r) => r.t))
  const byPolicy = new Map<string, number[]>()
  for (const row of rows) {
    if (row.t !== finalT) continue
    const bucket = byPolicy.get(row.policy) ?? []
    bucket.push(row.regret)
    byPolicy.set(row.policy, bucket)
  }

  const order = policyOrder(rows).filter((p) => byPolicy.has(p))
  const warnings: string[] = []
  const boxes: BoxStats[] = order.map((policy) => {
    const finals = [...byPolicy.get(policy)!].sort((a, b) => a - b)
    if (finals.length < 2) {
      warnings.push(`policy "${policy}" has a single run; its box is degenerate`)
    }
    return {
      policy,
      finals,
      median: quantile(finals, 0.5),
      q25: quantile(finals, 0.25),
      q75: quantile(finals, 0.75),
      lo: finals[0],
      hi: finals[finals.length - 1],
    }
  })

  const m = { ...DEFAULT_MARGIN, bottom: 110 }
  const yMax = Math.max(...boxes.map((b) => b.hi), 1e-9)
  const y = linearScale([0, yMax], [HEIGHT - m.bottom, m.top])
  const slot = (WIDTH - m.left - m.right) / boxes.length
  const half = Math.min(slot * 0.3, 40)

  const body: string[] = []
  boxes.forEach((box, i) => {
    const cx = m.left + slot * (i + 0.5)
    const color = styles[box.policy]?.color ?? PALETTE[i % PALETTE.length]
    const [yLo, yHi, yQ25, yQ75, yMed] = [box.lo, box.hi, box.q25, box.q75, box.median].map(y)
    body.push(`<path d="M${cx},${yLo}L${cx},${yQ25}" stroke="${color}"/>`)
    body.push(`<path d="M${cx},${yQ75}L${cx},${yHi}" stroke="${color}"/>`)
    body.push(`<path d="M${cx - half / 2},${yLo}L${cx + half / 2},${yLo}" stroke="${color}"/>`)
    body.push(`<path d="M${cx - half / 2},${yHi}L${cx + half / 2},${yHi}" stroke="${color}"/>`)
    body.push(
      `<rect x="${cx - half}" y="${yQ75}" width="${2 * half}" height="${Math.max(yQ25 - yQ75, 0)}" stroke="${color}" fill="${color}" fill-opacity="0.25"/>`,
    )
    body.push(`<path d="M${cx - half},${yMed}L${cx + half},${yMed}" stroke="${color}" stroke-width="2"/>`)
    body.push(
      `<text x="${cx}" y="${HEIGHT - m.bottom + 14}" text-anchor="end" font-size="10" transform="rotate(-35 ${cx} ${HEIGHT - m.bottom + 14})">${escapeXml(box.policy)}</text>`,
    )
  })
  body.push(yAxis(y, m.left, HEIGHT - m.bottom, m.top))
  body.push(
    `<text x="16" y="${(m.top + HEIGHT - m.bottom) / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${(m.top + HEIGHT - m.bottom) / 2})">final cumulative regret</text>`,
  )

  return { svg: svgDocument(WIDTH, HEIGHT, body), boxes, warnings }
}
