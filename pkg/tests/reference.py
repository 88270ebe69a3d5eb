"""Independent straight-line oracles the production code is checked against.

Everything here is deliberately written as plain loops over tokens, pairs,
and pixels, composed linearly, sharing as little as possible with the
library's vectorized implementations.
"""

from __future__ import annotations

import math

import numpy as np


def naive_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += float(a[i, t]) * float(b[t, j])
            out[i, j] = acc
    return out


def naive_layer_norm(x, gamma, beta, eps=1e-5):
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta


def naive_softmax_row(row):
    row = np.asarray(row, dtype=np.float64)
    shifted = row - row.max()
    e = np.exp(shifted)
    return e / e.sum()


def phi_scalar(x, mu, sigma):
    d2 = (x[0] - mu[0]) ** 2 + (x[1] - mu[1]) ** 2
    return math.exp(-d2 / (2.0 * sigma * sigma))


def omega_matrix(h, w, sigma):
    """Flat (hw x hw) Gaussian window table via elementwise phi."""
    n = h * w
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            for m in range(h):
                for nn in range(w):
                    out[i * w + j, m * w + nn] = phi_scalar((m, nn), (i, j), sigma)
    return out


def loop_self_attention(z, w_qkv, b_qkv, w_out, b_out, num_heads, variant,
                        h=None, w=None, sigma=None, mask=None):
    """Explicit-loop multi-head attention with all four logit variants."""
    n, d_model = z.shape
    d = d_model // num_heads
    q = np.zeros((n, d_model))
    k = np.zeros((n, d_model))
    v = np.zeros((n, d_model))
    for t in range(n):
        y = np.asarray(z[t], dtype=np.float64) @ np.asarray(w_qkv, dtype=np.float64) + b_qkv
        q[t], k[t], v[t] = y[:d_model], y[d_model:2 * d_model], y[2 * d_model:]

    omega = None
    if variant in ("neighbourhood_only", "naclip"):
        assert h * w == n
        omega = omega_matrix(h, w, sigma)

    merged = np.zeros((n, d_model))
    for head in range(num_heads):
        lo, hi = head * d, (head + 1) * d
        qs, ks, vs = q[:, lo:hi], k[:, lo:hi], v[:, lo:hi]
        logits = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if variant == "vanilla":
                    logits[i, j] = np.dot(qs[i], ks[j]) / math.sqrt(d)
                elif variant in ("kk", "naclip"):
                    logits[i, j] = np.dot(ks[i], ks[j]) / math.sqrt(d)
                else:
                    logits[i, j] = 0.0
                if omega is not None:
                    logits[i, j] += omega[i, j]
                if mask is not None:
                    logits[i, j] += mask[i, j]
        for i in range(n):
            p = naive_softmax_row(logits[i])
            acc = np.zeros(d)
            for j in range(n):
                acc += p[j] * vs[j]
            merged[i, lo:hi] = acc

    out = np.zeros((n, d_model))
    for t in range(n):
        out[t] = merged[t] @ np.asarray(w_out, dtype=np.float64) + b_out
    return out


def _block_weights(tensors, prefix):
    return {
        "ln1_g": tensors[f"{prefix}.ln1.gain"], "ln1_b": tensors[f"{prefix}.ln1.bias"],
        "qkv_w": tensors[f"{prefix}.attn.qkv.weight"], "qkv_b": tensors[f"{prefix}.attn.qkv.bias"],
        "out_w": tensors[f"{prefix}.attn.out.weight"], "out_b": tensors[f"{prefix}.attn.out.bias"],
        "ln2_g": tensors[f"{prefix}.ln2.gain"], "ln2_b": tensors[f"{prefix}.ln2.bias"],
        "fc1_w": tensors[f"{prefix}.mlp.fc1.weight"], "fc1_b": tensors[f"{prefix}.mlp.fc1.bias"],
        "fc2_w": tensors[f"{prefix}.mlp.fc2.weight"], "fc2_b": tensors[f"{prefix}.mlp.fc2.bias"],
    }


def _quick_gelu(x):
    return x / (1.0 + np.exp(-1.702 * x))


def _mlp(x, bw):
    hidden = _quick_gelu(x @ np.asarray(bw["fc1_w"], dtype=np.float64) + bw["fc1_b"])
    return hidden @ np.asarray(bw["fc2_w"], dtype=np.float64) + bw["fc2_b"]


def _attn(z, bw, heads, variant="vanilla", h=None, w=None, sigma=None, mask=None):
    return loop_self_attention(
        z, bw["qkv_w"], bw["qkv_b"], bw["out_w"], bw["out_b"], heads, variant,
        h=h, w=w, sigma=sigma, mask=mask,
    )


def _encoder_block(z, bw, heads, variant="vanilla", h=None, w=None, sigma=None, mask=None):
    z = z + _attn(naive_layer_norm(z, bw["ln1_g"], bw["ln1_b"]), bw, heads,
                  variant, h=h, w=w, sigma=sigma, mask=mask)
    z = z + _mlp(naive_layer_norm(z, bw["ln2_g"], bw["ln2_b"]), bw)
    return z


def reference_forward_features(image, tensors, cfg, variant="naclip", sigma=5.0,
                               arch="reduced"):
    """Straight-line ViT forward over a normalized 3 x S x S window."""
    p = cfg.patch_size
    grid = cfg.input_side // p
    rows = []
    for i in range(grid):
        for j in range(grid):
            patch = image[:, i * p:(i + 1) * p, j * p:(j + 1) * p]
            flat = np.asarray(patch, dtype=np.float64).reshape(-1)  # channel-major
            rows.append(flat @ tensors["visual.patch_embed.weight"] + tensors["visual.patch_embed.bias"])
    z = np.vstack([np.asarray(tensors["visual.class_embedding"], dtype=np.float64)[None, :], rows])
    z = z + tensors["visual.pos_embedding"]
    z = naive_layer_norm(z, tensors["visual.ln_pre.gain"], tensors["visual.ln_pre.bias"])

    for b in range(cfg.depth - 1):
        z = _encoder_block(z, _block_weights(tensors, f"visual.blocks.{b}"), cfg.heads)

    bw = _block_weights(tensors, f"visual.blocks.{cfg.depth - 1}")
    if arch == "reduced":
        normed = naive_layer_norm(z, bw["ln1_g"], bw["ln1_b"])
        patches = _attn(normed[1:], bw, cfg.heads, variant, h=grid, w=grid, sigma=sigma)
    elif variant == "vanilla":
        patches = _encoder_block(z, bw, cfg.heads)[1:]
    else:
        zp = z[1:]
        zp = zp + _attn(naive_layer_norm(zp, bw["ln1_g"], bw["ln1_b"]), bw, cfg.heads,
                        variant, h=grid, w=grid, sigma=sigma)
        patches = zp + _mlp(naive_layer_norm(zp, bw["ln2_g"], bw["ln2_b"]), bw)

    normed = naive_layer_norm(patches, tensors["visual.ln_post.gain"], tensors["visual.ln_post.bias"])
    return normed @ np.asarray(tensors["visual.proj"], dtype=np.float64)


def reference_text_forward(ids, eot_index, tensors, cfg):
    """Straight-line causal text transformer pooled at the EOT position."""
    n = cfg.context_length
    x = np.asarray(tensors["text.token_embedding"], dtype=np.float64)[ids] + tensors["text.pos_embedding"]
    mask = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if j > i:
                mask[i, j] = -np.inf
    for b in range(cfg.depth):
        x = _encoder_block(x, _block_weights(tensors, f"text.blocks.{b}"), cfg.heads, mask=mask)
    x = naive_layer_norm(x, tensors["text.ln_final.gain"], tensors["text.ln_final.bias"])
    return x[eot_index] @ np.asarray(tensors["text.proj"], dtype=np.float64)


def reference_segment(image_u8, tensors, cfg, class_matrix, variant, sigma, arch,
                      short_side, window, stride, temperature, image_mean, image_std,
                      resize_fn):
    """Straight-line pipeline: resize, tile, classify, fuse, argmax.

    `resize_fn` is the bilinear kernel (checked separately against hand
    values); everything else is composed here with explicit loops.
    """
    chw = image_u8.transpose(2, 0, 1).astype(np.float32) / 255.0
    _, h0, w0 = chw.shape
    if h0 <= w0:
        rh, rw = short_side, max(short_side, round(w0 * short_side / h0))
    else:
        rh, rw = max(short_side, round(h0 * short_side / w0)), short_side
    resized = resize_fn(chw, rh, rw)
    mean = np.asarray(image_mean, dtype=np.float32)[:, None, None]
    std = np.asarray(image_std, dtype=np.float32)[:, None, None]
    normalized = (resized - mean) / std

    def origins(length):
        outs = list(range(0, length - window + 1, stride))
        if outs[-1] + window < length:
            outs.append(length - window)
        return outs

    c = class_matrix.shape[0]
    sums = np.zeros((c, rh, rw), dtype=np.float64)
    cover = np.zeros((rh, rw), dtype=np.float64)
    for oy in origins(rh):
        for ox in origins(rw):
            win = normalized[:, oy:oy + window, ox:ox + window]
            feats = reference_forward_features(win, tensors, cfg, variant, sigma, arch)
            logits = np.zeros((c, cfg.input_side // cfg.patch_size, cfg.input_side // cfg.patch_size))
            grid = cfg.input_side // cfg.patch_size
            for t in range(feats.shape[0]):
                f = feats[t] / max(np.linalg.norm(feats[t]), 1e-12)
                for ci in range(c):
                    logits[ci, t // grid, t % grid] = temperature * float(np.dot(f, class_matrix[ci]))
            up = resize_fn(logits.astype(np.float32), window, window)
            sums[:, oy:oy + window, ox:ox + window] += up
            cover[oy:oy + window, ox:ox + window] += 1.0

    fused = sums / cover[None, :, :]
    small = np.zeros((rh, rw), dtype=np.int64)
    for y in range(rh):
        for x in range(rw):
            small[y, x] = int(np.argmax(fused[:, y, x]))
    ys = np.clip(np.round((np.arange(h0) + 0.5) * (rh / h0) - 0.5).astype(int), 0, rh - 1)
    xs = np.clip(np.round((np.arange(w0) + 0.5) * (rw / w0) - 0.5).astype(int), 0, rw - 1)
    return small[ys][:, xs]


# --- independent byte-level BPE ------------------------------------------------

def reference_byte_map():
    printable = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(0xA1, 0xAC + 1))
        + list(range(0xAE, 0xFF + 1))
    )
    table = {}
    fill = 0
    for b in range(256):
        if b in printable:
            table[b] = chr(b)
        else:
            table[b] = chr(256 + fill)
            fill += 1
    symbols = [chr(b) for b in printable] + [chr(256 + i) for i in range(256 - len(printable))]
    return table, symbols


def reference_vocab(merges):
    _, base = reference_byte_map()
    vocab = base + [s + "</w>" for s in base] + ["".join(m) for m in merges]
    vocab += ["<|startoftext|>", "<|endoftext|>"]
    return {tok: i for i, tok in enumerate(vocab)}


def reference_bpe_encode(text, merges):
    """One-merge-at-a-time BPE over whitespace-split lowercase words."""
    table, _ = reference_byte_map()
    ranks = {pair: i for i, pair in enumerate(merges)}
    vocab = reference_vocab(merges)
    ids = []
    for word in text.lower().split():
        mapped = "".join(table[b] for b in word.encode("utf-8"))
        syms = list(mapped[:-1]) + [mapped[-1] + "</w>"]
        while len(syms) > 1:
            best_rank, best_pos = None, None
            for pos in range(len(syms) - 1):
                r = ranks.get((syms[pos], syms[pos + 1]))
                if r is not None and (best_rank is None or r < best_rank):
                    best_rank, best_pos = r, pos
            if best_pos is None:
                break
            syms[best_pos:best_pos + 2] = [syms[best_pos] + syms[best_pos + 1]]
        ids.extend(vocab[s] for s in syms)
    return ids
