"""Convert a pretrained VGG-19 checkpoint into a TXW1 weight file.

The TXW1 layout (all little-endian):

    magic b"TXW1"
    uint32            layer count
    3 x float64       per-channel input means (0-255 RGB scale)
    per layer:
      uint8           kind (1 = conv, 2 = pool)
      uint16          name length, then the UTF-8 name
      conv only:      4 x uint32 (out, in, kh, kw), then float32 kernels
                      row-major, then float32 biases

Input is a torch checkpoint whose state dict holds the torchvision VGG-19
feature stack (keys features.N.weight / features.N.bias). The emitted file
keeps the RGB input convention; pass --input-order bgr for caffe-style
checkpoints whose first conv expects BGR, and the input channels of conv1_1
are flipped accordingly.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import struct
import sys

import numpy as np
import torch

MAGIC = b"TXW1"
KIND_CONV = 1
KIND_POOL = 2

# ImageNet per-channel RGB means on the 0-255 scale
IMAGENET_MEANS = (123.675, 116.28, 103.53)

# torchvision vgg19().features module indices for each named layer
VGG19_LAYERS = [
    ("conv1_1", 0), ("conv1_2", 2), ("pool1", None),
    ("conv2_1", 5), ("conv2_2", 7), ("pool2", None),
    ("conv3_1", 10), ("conv3_2", 12), ("conv3_3", 14), ("conv3_4", 16),
    ("pool3", None),
    ("conv4_1", 19), ("conv4_2", 21), ("conv4_3", 23), ("conv4_4", 25),
    ("pool4", None),
    ("conv5_1", 28), ("conv5_2", 30), ("conv5_3", 32), ("conv5_4", 34),
    ("pool5", None),
]

EXPECTED_SHAPES = {
    "conv1_1": (64, 3), "conv1_2": (64, 64),
    "conv2_1": (128, 64), "conv2_2": (128, 128),
    "conv3_1": (256, 128), "conv3_2": (256, 256), "conv3_3": (256, 256),
    "conv3_4": (256, 256),
    "conv4_1": (512, 256), "conv4_2": (512, 512), "conv4_3": (512, 512),
    "conv4_4": (512, 512),
    "conv5_1": (512, 512), "conv5_2": (512, 512), "conv5_3": (512, 512),
    "conv5_4": (512, 512),
}


class ExportError(ValueError):
    pass


def _state_dict(checkpoint_path):
    obj = torch.load(checkpoint_path, map_location="cpu", weights_only=True)
    if isinstance(obj, dict) and "state_dict" in obj:
        obj = obj["state_dict"]
    if not isinstance(obj, dict):
        raise ExportError("checkpoint does not contain a state dict")
    # tolerate a leading module name such as "features." already in place or
    # a wrapping "module." prefix from DataParallel training
    out = {}
    for key, value in obj.items():
        out[key.removeprefix("module.")] = value
    return out


def _conv_arrays(state, name, index, input_order):
    wkey, bkey = f"features.{index}.weight", f"features.{index}.bias"
    if wkey not in state or bkey not in state:
        raise ExportError(f"checkpoint is missing layer {name} "
                          f"({wkey} / {bkey})")
    w = state[wkey].detach().cpu().numpy().astype(np.float32)
    b = state[bkey].detach().cpu().numpy().astype(np.float32)
    out_ch, in_ch = EXPECTED_SHAPES[name]
    if w.shape != (out_ch, in_ch, 3, 3) or b.shape != (out_ch,):
        raise ExportError(
            f"layer {name}: unexpected shapes {w.shape} / {b.shape}, "
            f"expected {(out_ch, in_ch, 3, 3)} / {(out_ch,)}")
    if name == "conv1_1" and input_order == "bgr":
        w = w[:, ::-1].copy()  # flip the input channels back to RGB
    return w, b


def export(checkpoint_path, out_path, input_order="rgb",
           means=IMAGENET_MEANS) -> dict:
    """Write the TXW1 file and return the export manifest."""
    state = _state_dict(checkpoint_path)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(VGG19_LAYERS)))
    buf.write(struct.pack("<3d", *means))
    mapping = {}
    for name, index in VGG19_LAYERS:
        encoded = name.encode("utf-8")
        if index is None:
            buf.write(struct.pack("<B", KIND_POOL))
            buf.write(struct.pack("<H", len(encoded)))
            buf.write(encoded)
            continue
        w, b = _conv_arrays(state, name, index, input_order)
        mapping[name] = f"features.{index}"
        buf.write(struct.pack("<B", KIND_CONV))
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<4I", *w.shape))
        buf.write(w.astype("<f4").tobytes())
        buf.write(b.astype("<f4").tobytes())

    payload = buf.getvalue()
    with open(out_path, "wb") as f:
        f.write(payload)
    return {
        "source": str(checkpoint_path),
        "output": str(out_path),
        "layer_mapping": mapping,
        "channel_means": list(means),
        "input_order": input_order,
        "sha256": hashlib.sha256(payload).hexdigest(),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="txw-export",
        description="Convert a VGG-19 checkpoint into a TXW1 weight file.")
    parser.add_argument("checkpoint", help="torch checkpoint (.pth)")
    parser.add_argument("out", help="output TXW1 path")
    parser.add_argument("--input-order", choices=("rgb", "bgr"),
                        default="rgb",
                        help="input channel order the checkpoint expects")
    args = parser.parse_args(argv)
    try:
        manifest = export(args.checkpoint, args.out, args.input_order)
    except (ExportError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for key, value in manifest.items():
        print(json.dumps({key: value}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
