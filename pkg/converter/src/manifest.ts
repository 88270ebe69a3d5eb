/** Archive tensor names and shapes the segmentation engine expects. */

export interface VisionConfig {
  patchSize: number;
  depth: number;
  width: number;
  heads: number;
  outputDim: number;
  inputSide: number;
}

export interface TextConfig {
  width: number;
  depth: number;
  heads: number;
  outputDim: number;
  vocabSize: number;
  contextLength: number;
}

export interface ModelConfig {
  vision: VisionConfig;
  text: TextConfig;
}

export const PRESETS: Record<string, ModelConfig> = {
  b16: {
    vision: { patchSize: 16, depth: 12, width: 768, heads: 12, outputDim: 512, inputSide: 224 },
    text: { width: 512, depth: 12, heads: 8, outputDim: 512, vocabSize: 49408, contextLength: 77 },
  },
  b32: {
    vision: { patchSize: 32, depth: 12, width: 768, heads: 12, outputDim: 512, inputSide: 224 },
    text: { width: 512, depth: 12, heads: 8, outputDim: 512, vocabSize: 49408, contextLength: 77 },
  },
  l14: {
    vision: { patchSize: 14, depth: 24, width: 1024, heads: 16, outputDim: 768, inputSide: 224 },
    text: { width: 768, depth: 12, heads: 12, outputDim: 768, vocabSize: 49408, contextLength: 77 },
  },
};

function blockShapes(prefix: string, width: number): Map<string, number[]> {
  return new Map([
    [`${prefix}.ln1.gain`, [width]],
    [`${prefix}.ln1.bias`, [width]],
    [`${prefix}.attn.qkv.weight`, [width, 3 * width]],
    [`${prefix}.attn.qkv.bias`, [3 * width]],
    [`${prefix}.attn.out.weight`, [width, width]],
    [`${prefix}.attn.out.bias`, [width]],
    [`${prefix}.ln2.gain`, [width]],
    [`${prefix}.ln2.bias`, [width]],
    [`${prefix}.mlp.fc1.weight`, [width, 4 * width]],
    [`${prefix}.mlp.fc1.bias`, [4 * width]],
    [`${prefix}.mlp.fc2.weight`, [4 * width, width]],
    [`${prefix}.mlp.fc2.bias`, [width]],
  ]);
}

export function fullManifest(config: ModelConfig): Map<string, number[]> {
  const { vision, text } = config;
  const grid = vision.inputSide / vision.patchSize;
  const manifest = new Map<string, number[]>([
    ["visual.patch_embed.weight", [3 * vision.patchSize * vision.patchSize, vision.width]],
    ["visual.patch_embed.bias", [vision.width]],
    ["visual.class_embedding", [vision.width]],
    ["visual.pos_embedding", [1 + grid * grid, vision.width]],
    ["visual.ln_pre.gain", [vision.width]],
    ["visual.ln_pre.bias", [vision.width]],
    ["visual.ln_post.gain", [vision.width]],
    ["visual.ln_post.bias", [vision.width]],
    ["visual.proj", [vision.width, vision.outputDim]],
  ]);
  for (let i = 0; i < vision.depth; i++) {
    for (const [k, v] of blockShapes(`visual.blocks.${i}`, vision.width)) manifest.set(k, v);
  }
  manifest.set("text.token_embedding", [text.vocabSize, text.width]);
  manifest.set("text.pos_embedding", [text.contextLength, text.width]);
  manifest.set("text.ln_final.gain", [text.width]);
  manifest.set("text.ln_final.bias", [text.width]);
  manifest.set("text.proj", [text.width, text.outputDim]);
  for (let i = 0; i < text.depth; i++) {
    for (const [k, v] of blockShapes(`text.blocks.${i}`, text.width)) manifest.set(k, v);
  }
  return manifest;
}

export function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((x, i) => x === b[i]);
}
