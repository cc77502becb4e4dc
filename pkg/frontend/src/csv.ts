/**
 * Readers for the experiment CSV contract.
 *
 * summary.csv: policy,t,mean,std,min,q05,q25,q50,q75,q95,max
 * traces.csv:  policy,seed,t,regret
 *
 * Policy labels may contain commas (e.g. "pb-mhb(c=100,m=1,warm)"), so the
 * files are parsed as real CSV, not split on commas.
 */

import * as fs from 'fs'
import Papa from 'papaparse'

export const SUMMARY_COLUMNS = [
  'policy', 't', 'mean', 'std', 'min', 'q05', 'q25', 'q50', 'q75', 'q95', 'max',
] as const

export const TRACE_COLUMNS = ['policy', 'seed', 't', 'regret'] as const

export interface SummaryRow {
  policy: string
  t: number
  mean: number
  std: number
  min: number
  q05: number
  q25: number
  q50: number
  q75: number
  q95: number
  max: number
}

export interface TraceRow {
  policy: string
  seed: number
  t: number
  regret: number
}

export class MissingColumnError extends Error {
  constructor(public readonly column: string, path: string) {
    super(`${path}: missing column "${column}"`)
  }
}

function parseFile(path: string, required: readonly string[]): Record<string, string>[] {
  const text = fs.readFileSync(path, 'utf8')
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  })
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]
    throw new Error(`${path}: ${first.message} (row ${first.row})`)
  }
  const fields = parsed.meta.fields ?? []
  for (const column of required) {
    if (!fields.includes(column)) throw new MissingColumnError(column, path)
  }
  return parsed.data
}

function toNumber(raw: string, column: string, path: string): number {
  const value = Number(raw)
  if (!Number.isFinite(value)) {
    throw new Error(`${path}: column "${column}" has non-numeric value "${raw}"`)
  }
  return value
}

export function readSummary(path: string): SummaryRow[] {
  return parseFile(path, SUMMARY_COLUMNS).map((row) => {
    const out: Record<string, string | number> = { policy: row.policy }
    for (const column of SUMMARY_COLUMNS.slice(1)) {
      out[column] = toNumber(row[column], column, path)
    }
    return out as unknown as SummaryRow
  })
}

export function readTraces(path: string): TraceRow[] {
  return parseFile(path, TRACE_COLUMNS).map((row) => ({
    policy: row.policy,
    seed: toNumber(row.seed, 'seed', path),
    t: toNumber(row.t, 't', path),
    regret: toNumber(row.regret, 'regret', path),
  }))
}

/** Policy labels in first-appearance order, which fixes plot ordering. */
export function policyOrder(rows: { policy: string }[]): string[] {
  const seen: string[] = []
  for (const row of rows) {
    if (!seen.includes(row.policy)) seen.push(row.policy)
  }
  return seen
}
