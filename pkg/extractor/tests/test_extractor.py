import numpy as np
import pytest
import torch
from PIL import Image

import protoshot  # primary engine: interop check through the PFEB format
from protoshot_extractor import BACKBONES, build_backbone, extract
from protoshot_extractor.backbones import UnknownBackbone, forward_features
from protoshot_extractor.cli import main
from protoshot_extractor.extract import UndecodableImage, load_image_tensor


@pytest.fixture(scope="module")
def image_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("images")
    rs = np.random.RandomState(0)
    for cls in ("TB", "Sick", "Healthy"):
        d = root / cls
        d.mkdir()
        for i in range(2):
            arr = rs.randint(0, 256, (64, 64), dtype=np.uint8)
            Image.fromarray(arr, mode="L").save(d / f"img{i}.png")
    return root


@pytest.mark.parametrize(
    "name,length",
    [("vgg16", 25088), ("resnet18", 25088), ("resnet50", 100352)],
)
def test_feature_lengths(name, length):
    # untrained weights: shapes are weight-independent and no download is needed
    trunk = build_backbone(name, pretrained=False)
    x = torch.zeros(1, 3, 224, 224)
    feats = forward_features(trunk, x)
    assert feats.shape == (1, length)
    assert BACKBONES[name].feature_dim == length


def test_extraction_is_pure_inference(image_tree, tmp_path):
    trunk = build_backbone("resnet18", pretrained=False)
    before = [p.clone() for p in trunk.parameters()]
    x = load_image_tensor(next((image_tree / "TB").iterdir()))[None]
    forward_features(trunk, x)
    for p, b in zip(trunk.parameters(), before):
        assert torch.equal(p, b)


def test_same_image_same_bits(image_tree):
    trunk = build_backbone("resnet18", pretrained=False)
    path = next((image_tree / "TB").iterdir())
    a = forward_features(trunk, load_image_tensor(path)[None])
    b = forward_features(trunk, load_image_tensor(path)[None])
    assert torch.equal(a, b)


def test_pfeb_loads_in_primary_engine(image_tree, tmp_path):
    out = tmp_path / "feats.pfeb"
    count = extract(image_tree, "resnet18", out, pretrained=False)
    assert count == 6
    ds = protoshot.load_embeddings(out)
    assert ds.feature_dim == 25088
    assert ds.class_names == ["Healthy", "Sick", "TB"]
    assert len(ds) == 6
    assert (tmp_path / "feats.pfeb.manifest.txt").exists()


def test_grayscale_channels_are_replicated(image_tree):
    path = next((image_tree / "TB").iterdir())
    t = load_image_tensor(path)
    assert t.shape == (3, 224, 224)
    assert torch.equal(t[0], t[1]) and torch.equal(t[1], t[2])
    assert 0.0 <= t.min() and t.max() <= 1.0


def test_imagenet_norm_changes_values(image_tree):
    path = next((image_tree / "TB").iterdir())
    plain = load_image_tensor(path)
    normed = load_image_tensor(path, imagenet_norm=True)
    assert not torch.equal(plain, normed)


def test_unknown_backbone_rejected(image_tree, tmp_path):
    with pytest.raises(UnknownBackbone):
        extract(image_tree, "alexnet", tmp_path / "x.pfeb", pretrained=False)


def test_undecodable_image(tmp_path):
    d = tmp_path / "cls"
    d.mkdir()
    (d / "junk.png").write_bytes(b"not an image")
    with pytest.raises(UndecodableImage):
        extract(tmp_path, "resnet18", tmp_path / "x.pfeb", pretrained=False)


def test_cli_roundtrip(image_tree, tmp_path, capsys):
    out = tmp_path / "cli.pfeb"
    code = main(
        [
            "--root",
            str(image_tree),
            "--backbone",
            "resnet18",
            "--out",
            str(out),
            "--no-pretrained",
        ]
    )
    assert code == 0
    ds = protoshot.load_embeddings(out)
    assert len(ds) == 6 and ds.feature_dim == 25088
