# Copyright (c) the CFID Project Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Cross-checks the C++ graph runner against onnxruntime on a full-size
Inception-V3 graph with seeded random weights.

Writes model.onnx, manifest.json, golden.json and ref.png into a temporary
directory, with golden activations computed by onnxruntime, then runs
`cfid verify-model` on it. Exits 77 when torch or onnxruntime is missing.
"""

import hashlib
import warnings
import json
import subprocess
import sys
import tempfile
from pathlib import Path

SKIP = 77
HEAD = 8
LEVELS = [("MaxPool1", 64, 73, 73), ("MaxPool2", 192, 35, 35), ("AvgPool", 2048, 1, 1)]


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def main():
    if len(sys.argv) != 2:
        print("usage: inception_parity.py <path to cfid>", file=sys.stderr)
        return 2
    cli = sys.argv[1]
    warnings.filterwarnings("ignore", category=DeprecationWarning)
    try:
        import numpy as np
        import onnxruntime as ort
        import torch
        import torchvision
        from PIL import Image
    except ImportError as e:
        print(f"skipping: {e}")
        return SKIP

    class Taps(torch.nn.Module):
        def __init__(self, net):
            super().__init__()
            self.net = net

        def forward(self, x):
            n = self.net
            x = n.Conv2d_1a_3x3(x)
            x = n.Conv2d_2a_3x3(x)
            x = n.Conv2d_2b_3x3(x)
            p1 = n.maxpool1(x)
            x = n.Conv2d_3b_1x1(p1)
            x = n.Conv2d_4a_3x3(x)
            p2 = n.maxpool2(x)
            x = p2
            for block in (n.Mixed_5b, n.Mixed_5c, n.Mixed_5d, n.Mixed_6a, n.Mixed_6b,
                          n.Mixed_6c, n.Mixed_6d, n.Mixed_6e, n.Mixed_7a, n.Mixed_7b,
                          n.Mixed_7c):
                x = block(x)
            return p1, p2, n.avgpool(x)

    torch.manual_seed(20240613)
    net = torchvision.models.inception_v3(weights=None, aux_logits=False, init_weights=True,
                                          transform_input=False)
    # Non-trivial batch-norm statistics so folding and scaling are exercised.
    with torch.no_grad():
        for m in net.modules():
            if isinstance(m, torch.nn.BatchNorm2d):
                m.running_mean.uniform_(-0.1, 0.1)
                m.running_var.uniform_(0.5, 1.5)
    model = Taps(net).eval()

    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        onnx_path = d / "model.onnx"
        torch.onnx.export(model, torch.zeros(1, 3, 299, 299), str(onnx_path),
                          input_names=["input"], output_names=[l[0] for l in LEVELS],
                          opset_version=13, dynamo=False)

        rng = np.random.default_rng(7)
        yy, xx = np.mgrid[0:299, 0:299]
        base = np.stack([xx * 255 // 298, yy * 255 // 298, (xx + yy) * 255 // 596], axis=-1)
        noise = rng.integers(-40, 41, size=base.shape)
        pixels = np.clip(base + noise, 0, 255).astype(np.uint8)
        Image.fromarray(pixels, "RGB").save(d / "ref.png")

        tensor = (pixels.astype(np.float64).transpose(2, 0, 1) / 127.5 - 1.0)
        tensor = tensor.astype(np.float32)[None]
        session = ort.InferenceSession(str(onnx_path), providers=["CPUExecutionProvider"])
        outputs = session.run([l[0] for l in LEVELS], {"input": tensor})

        golden_levels = {}
        for (name, c, h, w), out in zip(LEVELS, outputs):
            if out.shape != (1, c, h, w):
                print(f"{name}: unexpected shape {out.shape}", file=sys.stderr)
                return 1
            v = out.reshape(-1).astype(np.float64)
            golden_levels[name] = {
                "mean": float(v.mean()),
                "rms": float(np.sqrt(np.mean(v * v))),
                "max_abs": float(np.abs(v).max()),
                "head": [float(x) for x in v[:HEAD]],
            }

        extractor_id = sha256(onnx_path)
        manifest = {
            "format_version": 1,
            "extractor_id": extractor_id,
            "input": {"name": "input", "side": 299, "layout": "NCHW", "range": [-1.0, 1.0]},
            "preprocessing": "input in [-1,1], 299x299, channel-major",
            "levels": [{"name": n, "channels": c, "height": h, "width": w, "flat_dim": c * h * w}
                       for n, c, h, w in LEVELS],
            "golden": "golden.json",
        }
        golden = {
            "extractor_id": extractor_id,
            "reference_image": "ref.png",
            "reference_sha256": sha256(d / "ref.png"),
            "levels": golden_levels,
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2))
        (d / "golden.json").write_text(json.dumps(golden, indent=2))

        result = subprocess.run([cli, "verify-model", "--model", str(onnx_path)],
                                capture_output=True, text=True)
        sys.stdout.write(result.stdout)
        sys.stderr.write(result.stderr)
        return result.returncode


if __name__ == "__main__":
    sys.exit(main())
