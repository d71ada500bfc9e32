#!/usr/bin/env python3
# Copyright 2026 The petcond Authors
# SPDX-License-Identifier: Apache-2.0
"""Export CLIP ViT-B/32 text embeddings for the count-level prompts.

Writes one float64 PTF vector per prompt plus clip_manifest.json, the layout read by
the pretrained-clip-text embedder backend. The exported vector is the pooled
end-of-sequence token after the text projection (`text_embeds`).

Requires torch and transformers; run once on a machine that has the weights.
"""

import argparse
import json
import pathlib
import struct

LEVELS = ["1/100", "1/20", "1/10", "1/4", "1/2", "full"]
TEMPLATE = "a {level} count level PET image"


def write_ptf_f64(path, values):
    with open(path, "wb") as f:
        f.write(b"PTF1")
        f.write(struct.pack("<BBI", 2, 1, len(values)))
        f.write(struct.pack("<%dd" % len(values), *values))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("output_dir", type=pathlib.Path)
    parser.add_argument("--model", default="openai/clip-vit-base-patch32")
    parser.add_argument("--template", default=TEMPLATE)
    args = parser.parse_args()

    import torch
    from transformers import CLIPModel, CLIPTokenizer

    tokenizer = CLIPTokenizer.from_pretrained(args.model)
    model = CLIPModel.from_pretrained(args.model).eval()
    prompts = [args.template.format(level=level) for level in LEVELS]
    with torch.no_grad():
        tokens = tokenizer(prompts, padding=True, return_tensors="pt")
        embeds = model.get_text_features(**tokens).double().numpy()

    args.output_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (prompt, vector) in enumerate(zip(prompts, embeds)):
        name = "prompt_%d.ptf" % i
        write_ptf_f64(args.output_dir / name, vector.tolist())
        entries.append({"prompt": prompt, "file": name})
    manifest = {"model": args.model, "dim": int(embeds.shape[1]), "output": "text_embeds",
                "prompts": entries}
    (args.output_dir / "clip_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
