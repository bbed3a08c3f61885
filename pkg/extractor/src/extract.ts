/**
 * extract --dir D --out F [--stats] [--batch B] [--strict]
 *
 * Extracts features from every PNG in a directory (lexicographic order,
 * one row per image) into an FMATX1 file, optionally accumulating an
 * FSTAT1 statistics file, plus a provenance manifest.
 */

import * as fs from "fs";
import * as path from "path";
import { EXTRACTOR_ID, FEATURE_DIM, INPUT_SIZE, extractImages } from "./extractor";
import { accumulateStats, writeFeatureMatrix, writeStats } from "./fstat";
import { decodePng, listImages } from "./image";

interface Args {
  dir: string;
  out: string;
  stats: boolean;
  batch: number;
  strict: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { dir: "", out: "", stats: false, batch: 32, strict: false };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--dir":
        args.dir = argv[++i];
        break;
      case "--out":
        args.out = argv[++i];
        break;
      case "--stats":
        args.stats = true;
        break;
      case "--batch":
        args.batch = parseInt(argv[++i], 10);
        break;
      case "--strict":
        args.strict = true;
        break;
      default:
        throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  if (!args.dir || !args.out) throw new Error("extract needs --dir and --out");
  if (!Number.isInteger(args.batch) || args.batch < 1) throw new Error("bad --batch");
  return args;
}

export function statsPathFor(out: string): string {
  return out.endsWith(".fmatx") ? out.slice(0, -".fmatx".length) + ".fstat" : out + ".fstat";
}

export function runExtract(args: Args): void {
  const names = listImages(args.dir);
  const images = [];
  const used: string[] = [];
  const skipped: string[] = [];
  for (const name of names) {
    const file = path.join(args.dir, name);
    try {
      images.push(decodePng(file));
      used.push(name);
    } catch (err) {
      if (args.strict) throw new Error(`undecodable image ${name}: ${err}`);
      skipped.push(name);
      process.stderr.write(`warning: skipping undecodable image ${name}\n`);
    }
  }
  if (images.length < 2) {
    throw new Error(`count < 2: found ${images.length} usable images in ${args.dir}`);
  }
  const data = extractImages(images, args.batch);
  const matrix = { rows: images.length, dim: FEATURE_DIM, data };
  writeFeatureMatrix(args.out, matrix);
  if (args.stats) writeStats(statsPathFor(args.out), accumulateStats(matrix));
  const manifest = {
    extractor_id: EXTRACTOR_ID,
    weights: "seeded pseudo-random, no pretraining",
    input_size: INPUT_SIZE,
    preprocessing: `shorter-side resize to ${INPUT_SIZE}, center crop, RGB scaled to [-1, 1]`,
    feature_dim: FEATURE_DIM,
    precision: "computed f32, serialized f64",
    directory: path.resolve(args.dir),
    rows: images.length,
    files: used,
    skipped,
  };
  fs.writeFileSync(args.out + ".manifest.json", JSON.stringify(manifest, null, 2) + "\n");
}

export function main(argv: string[]): number {
  try {
    runExtract(parseArgs(argv));
    return 0;
  } catch (err) {
    process.stderr.write(`extract: error: ${err instanceof Error ? err.message : err}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
