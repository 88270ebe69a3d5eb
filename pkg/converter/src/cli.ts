#!/usr/bin/env node
/** CLI: convert checkpoints to engine archives, or verify an existing pair.
 *
 * Usage:
 *   naseg-convert convert [--preset b16|b32|l14] <checkpoint.safetensors> <out.naw>
 *   naseg-convert verify  [--preset b16|b32|l14] <checkpoint.safetensors> <archive.naw>
 */

import { convert, verify } from "./convert.js";
import { PRESETS } from "./manifest.js";

function usage(): never {
  console.error(
    "usage: naseg-convert convert [--preset b16|b32|l14] <checkpoint.safetensors> <out.naw>\n" +
    "       naseg-convert verify  [--preset b16|b32|l14] <checkpoint.safetensors> <archive.naw>",
  );
  process.exit(2);
}

interface Args {
  command: string;
  preset: string;
  positional: string[];
}

function parseArgs(argv: string[]): Args {
  if (argv.length === 0) usage();
  const [command, ...rest] = argv;
  let preset = "b16";
  const positional: string[] = [];
  for (let i = 0; i < rest.length; i++) {
    if (rest[i] === "--preset") {
      preset = rest[++i] ?? usage();
    } else if (rest[i].startsWith("-")) {
      usage();
    } else {
      positional.push(rest[i]);
    }
  }
  return { command, preset, positional };
}

function main(): number {
  const args = parseArgs(process.argv.slice(2));
  const config = PRESETS[args.preset];
  if (!config) {
    console.error(`unknown preset '${args.preset}'; known: ${Object.keys(PRESETS).join(", ")}`);
    return 2;
  }
  if (args.positional.length !== 2) usage();
  const [input, output] = args.positional;

  try {
    if (args.command === "convert") {
      const result = convert(input, config, output);
      console.log(`wrote ${output}: ${result.tensorCount} tensors (${result.scheme} naming)`);
      if (result.ignoredSources.length) {
        console.log(`ignored checkpoint tensors: ${result.ignoredSources.join(", ")}`);
      }
      return 0;
    }
    if (args.command === "verify") {
      const report = verify(input, output, config);
      for (const name of report.absent) {
        console.log(`ABSENT ${name}`);
      }
      for (const f of report.failures) {
        console.log(`DIFF   ${f.name}: max |diff| = ${f.maxDiff}`);
      }
      const ok = report.absent.length === 0 && report.failures.length === 0;
      console.log(
        ok
          ? `OK: ${report.checked} tensors, max |diff| = ${report.maxDiff}`
          : `FAILED: ${report.failures.length} mismatched, ${report.absent.length} absent ` +
            `of ${report.checked + report.absent.length} tensors`,
      );
      return ok ? 0 : 1;
    }
    usage();
  } catch (e) {
    console.error(`naseg-convert: error: ${e instanceof Error ? e.message : e}`);
    return 1;
  }
}

process.exit(main());
