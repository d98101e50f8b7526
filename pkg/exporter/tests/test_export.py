import json

import numpy as np
import pytest
import torch
import torchvision

from txw_export.export import (ExportError, IMAGENET_MEANS, export, main)

# the engine is consumed only through its public weight-file interface
from texinpaint import forward, load_weights


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    """Randomly initialized (seeded) torchvision VGG-19 checkpoint."""
    torch.manual_seed(1234)
    model = torchvision.models.vgg19(weights=None)
    path = tmp_path_factory.mktemp("ckpt") / "vgg19.pth"
    torch.save(model.state_dict(), path)
    return path, model


def test_manifest_contents(checkpoint, tmp_path):
    path, _ = checkpoint
    out = tmp_path / "w.txw"
    manifest = export(path, out)
    assert len(manifest["layer_mapping"]) == 16
    assert sorted(manifest["layer_mapping"].values()) == sorted(
        {f"features.{i}" for i in
         (0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28, 30, 32, 34)})
    assert manifest["channel_means"] == list(IMAGENET_MEANS)
    assert len(manifest["sha256"]) == 64


def test_emitted_file_loads_in_engine(checkpoint, tmp_path):
    path, _ = checkpoint
    out = tmp_path / "w.txw"
    export(path, out)
    net = load_weights(out)
    names = [ly.name for ly in net.layers]
    assert names[0] == "conv1_1" and names[-1] == "pool5"
    assert len(names) == 21
    assert np.allclose(net.channel_means, IMAGENET_MEANS)


def test_conv1_activations_match_torch(checkpoint, tmp_path):
    path, model = checkpoint
    out = tmp_path / "w.txw"
    export(path, out)
    net = load_weights(out, statistics_layers=("conv1_1",))

    rng = np.random.default_rng(7)
    probe = rng.uniform(0, 255, (3, 8, 8))

    trace = forward(net, probe, layers=("conv1_1",))
    got = trace.activations["conv1_1"]

    with torch.no_grad():
        x = torch.tensor(probe - np.array(IMAGENET_MEANS)[:, None, None],
                         dtype=torch.float32)[None]
        conv = model.features[0]
        expected = torch.relu(conv(x))[0].numpy()
    assert np.abs(got - expected).max() <= 1e-3


def test_reexport_is_byte_identical(checkpoint, tmp_path):
    path, _ = checkpoint
    a, b = tmp_path / "a.txw", tmp_path / "b.txw"
    ma = export(path, a)
    mb = export(path, b)
    assert a.read_bytes() == b.read_bytes()
    assert ma["sha256"] == mb["sha256"]


def test_missing_layer_error_names_it(checkpoint, tmp_path):
    path, model = checkpoint
    state = {k: v for k, v in model.state_dict().items()
             if k != "features.10.weight"}
    broken = tmp_path / "broken.pth"
    torch.save(state, broken)
    with pytest.raises(ExportError, match="conv3_1"):
        export(broken, tmp_path / "w.txw")


def test_unexpected_shape_error(checkpoint, tmp_path):
    path, model = checkpoint
    state = dict(model.state_dict())
    state["features.0.weight"] = torch.zeros(64, 3, 5, 5)
    broken = tmp_path / "broken.pth"
    torch.save(state, broken)
    with pytest.raises(ExportError, match="conv1_1"):
        export(broken, tmp_path / "w.txw")


def test_bgr_flip_applies_to_first_layer_only(checkpoint, tmp_path):
    path, model = checkpoint
    rgb, bgr = tmp_path / "rgb.txw", tmp_path / "bgr.txw"
    export(path, rgb)
    export(path, bgr, input_order="bgr")
    net_rgb = load_weights(rgb)
    net_bgr = load_weights(bgr)
    assert np.array_equal(net_rgb.layers[0].weights[:, ::-1],
                          net_bgr.layers[0].weights)
    assert np.array_equal(net_rgb.layers[1].weights, net_bgr.layers[1].weights)


def test_cli_prints_json_lines_manifest(checkpoint, tmp_path, capsys):
    path, _ = checkpoint
    out = tmp_path / "w.txw"
    assert main([str(path), str(out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    merged = {}
    for line in lines:
        merged.update(json.loads(line))
    assert merged["output"] == str(out)
    assert out.exists()


def test_cli_missing_checkpoint(tmp_path, capsys):
    assert main([str(tmp_path / "nope.pth"), str(tmp_path / "w.txw")]) == 1
    assert "error" in capsys.readouterr().err
