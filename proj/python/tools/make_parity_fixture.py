"""Writes U-Net parity fixtures with an independent PyTorch reference.

Each fixture is a DALW container holding randomly initialized weights plus
``fixture.input`` and ``fixture.output`` produced by the torch model below. The
C++ forward pass must reproduce the output on the stored input. A plain weight
bundle without the fixture tensors is written as well.

    python python/tools/make_parity_fixture.py tests/fixtures
"""

import argparse
import json
import struct
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F


class UNet(nn.Module):
    def __init__(self, c_in, c_out, depth, base):
        super().__init__()
        self.depth = depth
        self.layers = nn.ModuleDict()
        conv = lambda ci, co, k=3: nn.Conv2d(ci, co, k, padding=k // 2)
        if depth == 0:
            self.layers["head"] = conv(c_in, c_out, 1)
            return
        ch = c_in
        for level in range(depth):
            w = base << level
            self.layers[f"enc{level}_conv1"] = conv(ch, w)
            self.layers[f"enc{level}_conv2"] = conv(w, w)
            ch = w
        wb = base << depth
        self.layers["bottleneck_conv1"] = conv(ch, wb)
        self.layers["bottleneck_conv2"] = conv(wb, wb)
        for level in reversed(range(depth)):
            w = base << level
            self.layers[f"dec{level}_up"] = conv(2 * w, w)
            self.layers[f"dec{level}_conv1"] = conv(2 * w, w)
            self.layers[f"dec{level}_conv2"] = conv(w, w)
        self.layers["head"] = conv(base, c_out, 1)

    def forward(self, x):
        L = self.layers
        skips = []
        for level in range(self.depth):
            x = F.relu(L[f"enc{level}_conv1"](x))
            x = F.relu(L[f"enc{level}_conv2"](x))
            skips.append(x)
            x = F.max_pool2d(x, 2)
        if self.depth:
            x = F.relu(L["bottleneck_conv1"](x))
            x = F.relu(L["bottleneck_conv2"](x))
        for level in reversed(range(self.depth)):
            x = F.relu(L[f"dec{level}_up"](F.interpolate(x, scale_factor=2, mode="nearest")))
            x = torch.cat([skips[level], x], dim=1)
            x = F.relu(L[f"dec{level}_conv1"](x))
            x = F.relu(L[f"dec{level}_conv2"](x))
        return L["head"](x)

    def named_tensors(self):
        """Tensors in the canonical table order with dotted names."""
        for key, module in self.layers.items():
            name = key.replace("_", ".")
            yield f"{name}.weight", module.weight
            yield f"{name}.bias", module.bias


def write_dalw(path, descriptor, tensors):
    table, blobs, offset = [], [], 0
    for name, array in tensors:
        array = np.ascontiguousarray(array, dtype="<f4")
        table.append({"name": name, "shape": list(array.shape), "offset": offset})
        blobs.append(array.tobytes())
        offset += array.nbytes
    header = json.dumps({"descriptor": descriptor, "tensors": table}).encode()
    with open(path, "wb") as f:
        f.write(b"DALW" + struct.pack("<IQ", 1, len(header)) + header)
        for blob in blobs:
            f.write(blob)


def make(path, vmics, mode, depth, base, bins, frames, seed, fixture=True):
    torch.manual_seed(seed)
    c_in = 2 * vmics
    c_out = 2 * vmics * vmics if mode == "full" else 2 * vmics
    model = UNet(c_in, c_out, depth, base).eval()
    with torch.no_grad():
        for _, b in model.named_tensors():
            if b.dim() == 1:
                b.uniform_(-0.1, 0.1)
        x = torch.randn(1, c_in, bins, frames)
        y = model(x)
    tensors = [(n, t.detach().numpy()) for n, t in model.named_tensors()]
    if fixture:
        tensors.append(("fixture.input", x[0].numpy()))
        tensors.append(("fixture.output", y[0].numpy()))
    descriptor = {"vmics": vmics, "mode": mode, "depth": depth, "base_channels": base}
    write_dalw(path, descriptor, tensors)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    make(args.out_dir / "unet_diag_v2_l3.dalw", 2, "diag", 3, 4, 32, 24, 1)
    make(args.out_dir / "unet_full_v3_l2.dalw", 3, "full", 2, 6, 16, 20, 2)
    make(args.out_dir / "unet_diag_v3_l0.dalw", 3, "diag", 0, 4, 8, 5, 3)
    # Plain weight bundle for end-to-end runs.
    make(args.out_dir / "weights_diag_v2_l2.dalw", 2, "diag", 2, 4, 8, 8, 4, fixture=False)


if __name__ == "__main__":
    main()
