/** Checkpoint -> archive conversion and exact verification. */

import { writeArchive, loadArchive } from "./archive.js";
import { fullManifest, ModelConfig, shapesEqual } from "./manifest.js";
import { applyRule, buildRules, detectScheme, ruleSources } from "./namemap.js";
import { loadSafetensors, Safetensors } from "./safetensors.js";

export interface ConvertResult {
  tensorCount: number;
  scheme: string;
  ignoredSources: string[];
}

function collectTensors(ckpt: Safetensors, config: ModelConfig) {
  const scheme = detectScheme(ckpt);
  const rules = buildRules(config, scheme, ckpt);
  const manifest = fullManifest(config);

  const missing: string[] = [];
  for (const [archiveName, rule] of rules) {
    for (const source of ruleSources(rule)) {
      if (!ckpt.has(source)) missing.push(`${source} (for ${archiveName})`);
    }
  }
  if (missing.length) {
    throw new Error(`checkpoint is missing required tensors:\n  ${missing.join("\n  ")}`);
  }

  const used = new Set<string>();
  const tensors = new Map<string, { shape: number[]; data: Float32Array }>();
  for (const [archiveName, wantShape] of manifest) {
    const rule = rules.get(archiveName);
    if (!rule) throw new Error(`no mapping rule produces '${archiveName}'`);
    const data = applyRule(ckpt, rule, wantShape, archiveName);
    const wantCount = wantShape.reduce((a, b) => a * b, 1);
    if (data.length !== wantCount) {
      throw new Error(
        `${archiveName}: produced ${data.length} values but the manifest wants ` +
        `shape [${wantShape}] (${wantCount}); wrong preset for this checkpoint?`,
      );
    }
    ruleSources(rule).forEach((s) => used.add(s));
    tensors.set(archiveName, { shape: wantShape, data });
  }
  const ignoredSources = ckpt.names().filter((n) => !used.has(n));
  return { scheme, tensors, ignoredSources };
}

export function convert(checkpointPath: string, config: ModelConfig, outPath: string): ConvertResult {
  const ckpt = loadSafetensors(checkpointPath);
  const { scheme, tensors, ignoredSources } = collectTensors(ckpt, config);
  // guard shapes that a pure element-count check would miss
  const manifest = fullManifest(config);
  for (const [name, t] of tensors) {
    if (!shapesEqual(t.shape, manifest.get(name)!)) {
      throw new Error(`${name}: shape [${t.shape}] does not match manifest`);
    }
  }
  writeArchive(outPath, tensors);
  return { tensorCount: tensors.size, scheme, ignoredSources };
}

export interface VerifyReport {
  checked: number;
  maxDiff: number;
  failures: { name: string; maxDiff: number }[];
  absent: string[];
}

/** Recompute every expected tensor from the checkpoint and compare exactly. */
export function verify(checkpointPath: string, archivePath: string, config: ModelConfig): VerifyReport {
  const ckpt = loadSafetensors(checkpointPath);
  const archive = loadArchive(archivePath);
  const scheme = detectScheme(ckpt);
  const rules = buildRules(config, scheme, ckpt);
  const manifest = fullManifest(config);

  const failures: { name: string; maxDiff: number }[] = [];
  const absent: string[] = [];
  let checked = 0;
  let maxDiff = 0;
  for (const [archiveName, wantShape] of manifest) {
    if (!archive.has(archiveName)) {
      absent.push(archiveName);
      continue;
    }
    const want = applyRule(ckpt, rules.get(archiveName)!, wantShape, archiveName);
    const got = archive.read(archiveName);
    let diff = Infinity;
    if (got.length === want.length) {
      diff = 0;
      for (let i = 0; i < got.length; i++) {
        const d = Math.abs(got[i] - want[i]);
        if (Number.isNaN(got[i]) !== Number.isNaN(want[i])) diff = Infinity;
        else if (!Number.isNaN(d) && d > diff) diff = d;
      }
    }
    checked += 1;
    if (diff > 0) failures.push({ name: archiveName, maxDiff: diff });
    if (diff > maxDiff) maxDiff = diff;
  }
  return { checked, maxDiff, failures, absent };
}
