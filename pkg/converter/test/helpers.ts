import { Buffer } from "node:buffer";
import { floatToHalf } from "../src/fp16.js";
import { ModelConfig } from "../src/manifest.js";
import { writeSafetensors } from "../src/safetensors.js";

export const TINY: ModelConfig = {
  vision: { patchSize: 32, depth: 2, width: 8, heads: 2, outputDim: 6, inputSide: 224 },
  text: { width: 8, depth: 2, heads: 2, outputDim: 6, vocabSize: 64, contextLength: 16 },
};

/** Deterministic pseudo-random values, reproducible across runs. */
export function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return (state / 2 ** 32) * 2 - 1;
  };
}

export type CheckpointTensors = Map<string, { dtype: "F16" | "F32"; shape: number[]; data: Buffer }>;

export function f16Tensor(rng: () => number, shape: number[]): { dtype: "F16"; shape: number[]; data: Buffer } {
  const count = shape.reduce((a, b) => a * b, 1);
  const data = Buffer.alloc(count * 2);
  for (let i = 0; i < count; i++) {
    data.writeUInt16LE(floatToHalf(rng() * 0.05), i * 2);
  }
  return { dtype: "F16", shape, data };
}

function addBlockOpenai(t: CheckpointTensors, rng: () => number, prefix: string, width: number): void {
  t.set(`${prefix}.ln_1.weight`, f16Tensor(rng, [width]));
  t.set(`${prefix}.ln_1.bias`, f16Tensor(rng, [width]));
  t.set(`${prefix}.attn.in_proj_weight`, f16Tensor(rng, [3 * width, width]));
  t.set(`${prefix}.attn.in_proj_bias`, f16Tensor(rng, [3 * width]));
  t.set(`${prefix}.attn.out_proj.weight`, f16Tensor(rng, [width, width]));
  t.set(`${prefix}.attn.out_proj.bias`, f16Tensor(rng, [width]));
  t.set(`${prefix}.ln_2.weight`, f16Tensor(rng, [width]));
  t.set(`${prefix}.ln_2.bias`, f16Tensor(rng, [width]));
  t.set(`${prefix}.mlp.c_fc.weight`, f16Tensor(rng, [4 * width, width]));
  t.set(`${prefix}.mlp.c_fc.bias`, f16Tensor(rng, [4 * width]));
  t.set(`${prefix}.mlp.c_proj.weight`, f16Tensor(rng, [width, 4 * width]));
  t.set(`${prefix}.mlp.c_proj.bias`, f16Tensor(rng, [width]));
}

export function tinyOpenaiCheckpoint(path: string, seed = 7): CheckpointTensors {
  const { vision, text } = TINY;
  const grid = vision.inputSide / vision.patchSize;
  const rng = makeRng(seed);
  const t: CheckpointTensors = new Map();
  t.set("visual.class_embedding", f16Tensor(rng, [vision.width]));
  t.set("visual.positional_embedding", f16Tensor(rng, [1 + grid * grid, vision.width]));
  t.set("visual.conv1.weight", f16Tensor(rng, [vision.width, 3, vision.patchSize, vision.patchSize]));
  t.set("visual.ln_pre.weight", f16Tensor(rng, [vision.width]));
  t.set("visual.ln_pre.bias", f16Tensor(rng, [vision.width]));
  for (let i = 0; i < vision.depth; i++) {
    addBlockOpenai(t, rng, `visual.transformer.resblocks.${i}`, vision.width);
  }
  t.set("visual.ln_post.weight", f16Tensor(rng, [vision.width]));
  t.set("visual.ln_post.bias", f16Tensor(rng, [vision.width]));
  t.set("visual.proj", f16Tensor(rng, [vision.width, vision.outputDim]));
  t.set("token_embedding.weight", f16Tensor(rng, [text.vocabSize, text.width]));
  t.set("positional_embedding", f16Tensor(rng, [text.contextLength, text.width]));
  for (let i = 0; i < text.depth; i++) {
    addBlockOpenai(t, rng, `transformer.resblocks.${i}`, text.width);
  }
  t.set("ln_final.weight", f16Tensor(rng, [text.width]));
  t.set("ln_final.bias", f16Tensor(rng, [text.width]));
  t.set("text_projection", f16Tensor(rng, [text.width, text.outputDim]));
  t.set("logit_scale", f16Tensor(rng, []));
  writeSafetensors(path, t);
  return t;
}

function addBlockHf(t: CheckpointTensors, rng: () => number, prefix: string, width: number): void {
  t.set(`${prefix}.layer_norm1.weight`, f16Tensor(rng, [width]));
  t.set(`${prefix}.layer_norm1.bias`, f16Tensor(rng, [width]));
  for (const p of ["q_proj", "k_proj", "v_proj", "out_proj"]) {
    t.set(`${prefix}.self_attn.${p}.weight`, f16Tensor(rng, [width, width]));
    t.set(`${prefix}.self_attn.${p}.bias`, f16Tensor(rng, [width]));
  }
  t.set(`${prefix}.layer_norm2.weight`, f16Tensor(rng, [width]));
  t.set(`${prefix}.layer_norm2.bias`, f16Tensor(rng, [width]));
  t.set(`${prefix}.mlp.fc1.weight`, f16Tensor(rng, [4 * width, width]));
  t.set(`${prefix}.mlp.fc1.bias`, f16Tensor(rng, [4 * width]));
  t.set(`${prefix}.mlp.fc2.weight`, f16Tensor(rng, [width, 4 * width]));
  t.set(`${prefix}.mlp.fc2.bias`, f16Tensor(rng, [width]));
}

export function tinyHfCheckpoint(path: string, seed = 9): CheckpointTensors {
  const { vision, text } = TINY;
  const grid = vision.inputSide / vision.patchSize;
  const rng = makeRng(seed);
  const t: CheckpointTensors = new Map();
  t.set("vision_model.embeddings.class_embedding", f16Tensor(rng, [vision.width]));
  t.set("vision_model.embeddings.patch_embedding.weight",
        f16Tensor(rng, [vision.width, 3, vision.patchSize, vision.patchSize]));
  t.set("vision_model.embeddings.position_embedding.weight",
        f16Tensor(rng, [1 + grid * grid, vision.width]));
  t.set("vision_model.pre_layrnorm.weight", f16Tensor(rng, [vision.width]));
  t.set("vision_model.pre_layrnorm.bias", f16Tensor(rng, [vision.width]));
  for (let i = 0; i < vision.depth; i++) {
    addBlockHf(t, rng, `vision_model.encoder.layers.${i}`, vision.width);
  }
  t.set("vision_model.post_layernorm.weight", f16Tensor(rng, [vision.width]));
  t.set("vision_model.post_layernorm.bias", f16Tensor(rng, [vision.width]));
  t.set("visual_projection.weight", f16Tensor(rng, [vision.outputDim, vision.width]));
  t.set("text_model.embeddings.token_embedding.weight", f16Tensor(rng, [text.vocabSize, text.width]));
  t.set("text_model.embeddings.position_embedding.weight", f16Tensor(rng, [text.contextLength, text.width]));
  for (let i = 0; i < text.depth; i++) {
    addBlockHf(t, rng, `text_model.encoder.layers.${i}`, text.width);
  }
  t.set("text_model.final_layer_norm.weight", f16Tensor(rng, [text.width]));
  t.set("text_model.final_layer_norm.bias", f16Tensor(rng, [text.width]));
  t.set("text_projection.weight", f16Tensor(rng, [text.outputDim, text.width]));
  writeSafetensors(path, t);
  return t;
}
