#!/usr/bin/env node
/**
 * Render figures from pbm-lab CSV outputs.
 *
 * Usage:
 *   plot-regret --summary summary.csv --out fig.svg [--grid] [--style styles.json] [--arrays out.json]
 *   plot-regret --boxplot traces.csv --out fig.svg [--style styles.json] [--arrays out.json]
 *
 * --arrays dumps the plotted series as JSON so callers can verify the figure
 * against the CSV columns without touching pixels.
 */

import * as fs from 'fs'
import { MissingColumnError, readSummary, readTraces } from './csv'
import { StyleMap, plotFinalRegretBoxplot, plotHyperparamGrid, plotRegretCurves } from './plots'

interface Args {
  summary?: string
  boxplot?: string
  out?: string
  style?: string
  arrays?: string
  grid: boolean
}

function parseArgs(argv: string[]): Args {
  const args: Args = { grid: false }
  for (let i = 0; i < argv.length; i += 1) {
    const flag = argv[i]
    const needsValue = ['--summary', '--boxplot', '--out', '--style', '--arrays']
    if (flag === '--grid') {
      args.grid = true
    } else if (needsValue.includes(flag)) {
      const value = argv[i + 1]
      if (value === undefined) throw new Error(`${flag} needs a value`)
      args[flag.slice(2) as 'summary' | 'boxplot' | 'out' | 'style' | 'arrays'] = value
      i += 1
    } else {
      throw new Error(`unknown flag ${flag}`)
    }
  }
  return args
}

export function main(argv: string[]): number {
  let args: Args
  try {
    args = parseArgs(argv)
    if (!args.out) throw new Error('--out is required')
    if (!args.summary && !args.boxplot) throw new Error('need --summary or --boxplot')

    const styles: StyleMap = args.style
      ? (JSON.parse(fs.readFileSync(args.style, 'utf8')) as StyleMap)
      : {}

    let svg: string
    let arrays: unknown
    if (args.boxplot) {
      const result = plotFinalRegretBoxplot(readTraces(args.boxplot), styles)
      for (const warning of result.warnings) console.error(`warning: ${warning}`)
      svg = result.svg
      arrays = result.boxes
    } else {
      const rows = readSummary(args.summary!)
      const result = args.grid ? plotHyperparamGrid(rows, styles) : plotRegretCurves(rows, styles)
      svg = result.svg
      arrays = { series: result.series, xTicks: result.xTicks }
    }

    fs.writeFileSync(args.out, svg)
    if (args.arrays) fs.writeFileSync(args.arrays, JSON.stringify(arrays, null, 1))
    return 0
  } catch (error) {
    if (error instanceof MissingColumnError) {
      console.error(`plot-regret: missing column: ${error.column}`)
    } else {
      console.error(`plot-regret: ${(error as Error).message}`)
    }
    return 1
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)))
}
