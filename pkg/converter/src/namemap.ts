/** Ordered mapping rules from upstream checkpoint names to archive names.
 *
 * Two upstream naming schemes are recognized: the original model releases
 * ("visual.transformer.resblocks...") and the HF layout
 * ("vision_model.encoder.layers...", separate q/k/v projections).  All
 * linear weights are transposed into the engine's row-major
 * `output = input @ W` convention; the patch-embedding convolution kernel
 * is flattened channel-major; the patch-embedding bias is synthesized as
 * zeros when the source model has none.
 */

import { Safetensors } from "./safetensors.js";
import { ModelConfig } from "./manifest.js";

export type Rule =
  | { kind: "copy"; source: string }
  | { kind: "transpose"; source: string }
  | { kind: "convFlatten"; source: string }
  | { kind: "zerosOr"; source: string }
  | { kind: "concatT"; sources: [string, string, string] }
  | { kind: "concatBias"; sources: [string, string, string] };

export type Scheme = "openai" | "hf";

export function detectScheme(ckpt: Safetensors): Scheme {
  if (ckpt.has("visual.conv1.weight")) return "openai";
  if (ckpt.has("vision_model.embeddings.patch_embedding.weight")) return "hf";
  throw new Error(
    "unrecognized checkpoint: expected 'visual.conv1.weight' (original naming) " +
    "or 'vision_model.embeddings.patch_embedding.weight' (HF naming)",
  );
}

function openaiBlock(rules: Map<string, Rule>, archivePrefix: string, srcPrefix: string): void {
  rules.set(`${archivePrefix}.ln1.gain`, { kind: "copy", source: `${srcPrefix}.ln_1.weight` });
  rules.set(`${archivePrefix}.ln1.bias`, { kind: "copy", source: `${srcPrefix}.ln_1.bias` });
  rules.set(`${archivePrefix}.attn.qkv.weight`, { kind: "transpose", source: `${srcPrefix}.attn.in_proj_weight` });
  rules.set(`${archivePrefix}.attn.qkv.bias`, { kind: "copy", source: `${srcPrefix}.attn.in_proj_bias` });
  rules.set(`${archivePrefix}.attn.out.weight`, { kind: "transpose", source: `${srcPrefix}.attn.out_proj.weight` });
  rules.set(`${archivePrefix}.attn.out.bias`, { kind: "copy", source: `${srcPrefix}.attn.out_proj.bias` });
  rules.set(`${archivePrefix}.ln2.gain`, { kind: "copy", source: `${srcPrefix}.ln_2.weight` });
  rules.set(`${archivePrefix}.ln2.bias`, { kind: "copy", source: `${srcPrefix}.ln_2.bias` });
  rules.set(`${archivePrefix}.mlp.fc1.weight`, { kind: "transpose", source: `${srcPrefix}.mlp.c_fc.weight` });
  rules.set(`${archivePrefix}.mlp.fc1.bias`, { kind: "copy", source: `${srcPrefix}.mlp.c_fc.bias` });
  rules.set(`${archivePrefix}.mlp.fc2.weight`, { kind: "transpose", source: `${srcPrefix}.mlp.c_proj.weight` });
  rules.set(`${archivePrefix}.mlp.fc2.bias`, { kind: "copy", source: `${srcPrefix}.mlp.c_proj.bias` });
}

function hfBlock(rules: Map<string, Rule>, archivePrefix: string, srcPrefix: string): void {
  rules.set(`${archivePrefix}.ln1.gain`, { kind: "copy", source: `${srcPrefix}.layer_norm1.weight` });
  rules.set(`${archivePrefix}.ln1.bias`, { kind: "copy", source: `${srcPrefix}.layer_norm1.bias` });
  rules.set(`${archivePrefix}.attn.qkv.weight`, {
    kind: "concatT",
    sources: [`${srcPrefix}.self_attn.q_proj.weight`, `${srcPrefix}.self_attn.k_proj.weight`,
              `${srcPrefix}.self_attn.v_proj.weight`],
  });
  rules.set(`${archivePrefix}.attn.qkv.bias`, {
    kind: "concatBias",
    sources: [`${srcPrefix}.self_attn.q_proj.bias`, `${srcPrefix}.self_attn.k_proj.bias`,
              `${srcPrefix}.self_attn.v_proj.bias`],
  });
  rules.set(`${archivePrefix}.attn.out.weight`, { kind: "transpose", source: `${srcPrefix}.self_attn.out_proj.weight` });
  rules.set(`${archivePrefix}.attn.out.bias`, { kind: "copy", source: `${srcPrefix}.self_attn.out_proj.bias` });
  rules.set(`${archivePrefix}.ln2.gain`, { kind: "copy", source: `${srcPrefix}.layer_norm2.weight` });
  rules.set(`${archivePrefix}.ln2.bias`, { kind: "copy", source: `${srcPrefix}.layer_norm2.bias` });
  rules.set(`${archivePrefix}.mlp.fc1.weight`, { kind: "transpose", source: `${srcPrefix}.mlp.fc1.weight` });
  rules.set(`${archivePrefix}.mlp.fc1.bias`, { kind: "copy", source: `${srcPrefix}.mlp.fc1.bias` });
  rules.set(`${archivePrefix}.mlp.fc2.weight`, { kind: "transpose", source: `${srcPrefix}.mlp.fc2.weight` });
  rules.set(`${archivePrefix}.mlp.fc2.bias`, { kind: "copy", source: `${srcPrefix}.mlp.fc2.bias` });
}

export function buildRules(config: ModelConfig, scheme: Scheme, ckpt?: Safetensors): Map<string, Rule> {
  const rules = new Map<string, Rule>();
  if (scheme === "openai") {
    rules.set("visual.patch_embed.weight", { kind: "convFlatten", source: "visual.conv1.weight" });
    rules.set("visual.patch_embed.bias", { kind: "zerosOr", source: "visual.conv1.bias" });
    rules.set("visual.class_embedding", { kind: "copy", source: "visual.class_embedding" });
    rules.set("visual.pos_embedding", { kind: "copy", source: "visual.positional_embedding" });
    rules.set("visual.ln_pre.gain", { kind: "copy", source: "visual.ln_pre.weight" });
    rules.set("visual.ln_pre.bias", { kind: "copy", source: "visual.ln_pre.bias" });
    for (let i = 0; i < config.vision.depth; i++) {
      openaiBlock(rules, `visual.blocks.${i}`, `visual.transformer.resblocks.${i}`);
    }
    rules.set("visual.ln_post.gain", { kind: "copy", source: "visual.ln_post.weight" });
    rules.set("visual.ln_post.bias", { kind: "copy", source: "visual.ln_post.bias" });
    rules.set("visual.proj", { kind: "copy", source: "visual.proj" });
    rules.set("text.token_embedding", { kind: "copy", source: "token_embedding.weight" });
    rules.set("text.pos_embedding", { kind: "copy", source: "positional_embedding" });
    for (let i = 0; i < config.text.depth; i++) {
      openaiBlock(rules, `text.blocks.${i}`, `transformer.resblocks.${i}`);
    }
    rules.set("text.ln_final.gain", { kind: "copy", source: "ln_final.weight" });
    rules.set("text.ln_final.bias", { kind: "copy", source: "ln_final.bias" });
    rules.set("text.proj", { kind: "copy", source: "text_projection" });
  } else {
    // HF ships the vision pre-norm under a historically misspelled key
    const preNorm = ckpt?.has("vision_model.pre_layernorm.weight")
      ? "vision_model.pre_layernorm" : "vision_model.pre_layrnorm";
    rules.set("visual.patch_embed.weight", { kind: "convFlatten", source: "vision_model.embeddings.patch_embedding.weight" });
    rules.set("visual.patch_embed.bias", { kind: "zerosOr", source: "vision_model.embeddings.patch_embedding.bias" });
    rules.set("visual.class_embedding", { kind: "copy", source: "vision_model.embeddings.class_embedding" });
    rules.set("visual.pos_embedding", { kind: "copy", source: "vision_model.embeddings.position_embedding.weight" });
    rules.set("visual.ln_pre.gain", { kind: "copy", source: `${preNorm}.weight` });
    rules.set("visual.ln_pre.bias", { kind: "copy", source: `${preNorm}.bias` });
    for (let i = 0; i < config.vision.depth; i++) {
      hfBlock(rules, `visual.blocks.${i}`, `vision_model.encoder.layers.${i}`);
    }
    rules.set("visual.ln_post.gain", { kind: "copy", source: "vision_model.post_layernorm.weight" });
    rules.set("visual.ln_post.bias", { kind: "copy", source: "vision_model.post_layernorm.bias" });
    rules.set("visual.proj", { kind: "transpose", source: "visual_projection.weight" });
    rules.set("text.token_embedding", { kind: "copy", source: "text_model.embeddings.token_embedding.weight" });
    rules.set("text.pos_embedding", { kind: "copy", source: "text_model.embeddings.position_embedding.weight" });
    for (let i = 0; i < config.text.depth; i++) {
      hfBlock(rules, `text.blocks.${i}`, `text_model.encoder.layers.${i}`);
    }
    rules.set("text.ln_final.gain", { kind: "copy", source: "text_model.final_layer_norm.weight" });
    rules.set("text.ln_final.bias", { kind: "copy", source: "text_model.final_layer_norm.bias" });
    rules.set("text.proj", { kind: "transpose", source: "text_projection.weight" });
  }
  return rules;
}

export function ruleSources(rule: Rule): string[] {
  switch (rule.kind) {
    case "zerosOr":
      return [];
    case "concatT":
    case "concatBias":
      return rule.sources;
    default:
      return [rule.source];
  }
}

function transpose2d(data: Float32Array, rows: number, cols: number): Float32Array {
  const out = new Float32Array(data.length);
  for (let i = 0; i < rows; i++) {
    for (let j = 0; j < cols; j++) {
      out[j * rows + i] = data[i * cols + j];
    }
  }
  return out;
}

/** Produce one archive tensor; `wantShape` comes from the engine manifest. */
export function applyRule(ckpt: Safetensors, rule: Rule, wantShape: number[], name: string): Float32Array {
  const count = wantShape.reduce((a, b) => a * b, 1);
  switch (rule.kind) {
    case "copy":
      return ckpt.read(rule.source);
    case "transpose": {
      const info = ckpt.info(rule.source);
      if (info.shape.length !== 2) {
        throw new Error(`${name}: source '${rule.source}' is rank-${info.shape.length}, expected 2`);
      }
      return transpose2d(ckpt.read(rule.source), info.shape[0], info.shape[1]);
    }
    case "convFlatten": {
      const info = ckpt.info(rule.source);
      if (info.shape.length !== 4) {
        throw new Error(`${name}: source '${rule.source}' is rank-${info.shape.length}, expected 4`);
      }
      const [d, c, ph, pw] = info.shape;
      return transpose2d(ckpt.read(rule.source), d, c * ph * pw);
    }
    case "zerosOr":
      return ckpt.has(rule.source) ? ckpt.read(rule.source) : new Float32Array(count);
    case "concatT": {
      const parts = rule.sources.map((s) => {
        const info = ckpt.info(s);
        return { data: ckpt.read(s), rows: info.shape[0], cols: info.shape[1] };
      });
      const width = parts[0].cols;
      const out = new Float32Array(count);
      // each part is (D, D) applied as y = x W^T; store its transpose as
      // one D-wide column block of the fused (D, 3D) matrix
      parts.forEach((part, blockIdx) => {
        for (let i = 0; i < width; i++) {
          for (let j = 0; j < part.rows; j++) {
            out[i * 3 * width + blockIdx * width + j] = part.data[j * part.cols + i];
          }
        }
      });
      return out;
    }
    case "concatBias": {
      const parts = rule.sources.map((s) => ckpt.read(s));
      const out = new Float32Array(count);
      let offset = 0;
      for (const part of parts) {
        out.set(part, offset);
        offset += part.length;
      }
      return out;
    }
  }
}
