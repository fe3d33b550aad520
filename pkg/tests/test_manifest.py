import pytest

from avibench.manifest import (DatasetManifest, ManifestError, ManifestItem, format_manifest, load_manifest,
                               parse_manifest, write_manifest)


def test_row_without_site():
    m = parse_manifest("itemid,hasbird,site,path\nclip007,1,,audio/clip007.wav\n")
    (it,) = m.items
    assert it.item_id == "clip007" and it.label == 1 and it.site is None
    assert it.path == "audio/clip007.wav"


def test_roundtrip(tmp_path):
    m = DatasetManifest([ManifestItem("a", 1, "s1", "audio/a.wav"), ManifestItem("b", 0, None, "b.wav"),
                         ManifestItem("c", None, "s2", "x/c.wav")], tmp_path)
    path = write_manifest(m, tmp_path / "manifest.csv")
    back = load_manifest(path)
    assert back.items == m.items
    raw = path.read_bytes()
    assert b"\r\n" not in raw and raw.startswith(b"itemid,hasbird,site,path\n")
    assert b"c,?,s2" in raw


def test_duplicate_id():
    with pytest.raises(ManifestError, match="duplicate id"):
        parse_manifest("itemid,hasbird,site,path\nclip007,1,,a.wav\nclip007,0,,b.wav\n")


def test_bad_label_token():
    with pytest.raises(ManifestError):
        parse_manifest("itemid,hasbird,site,path\nx,yes,,a.wav\n")


def test_path_must_stay_under_root(tmp_path):
    with pytest.raises(ManifestError):
        DatasetManifest([ManifestItem("a", 1, None, "../outside.wav")], tmp_path)


def test_format_stable():
    text = "itemid,hasbird,site,path\nx,0,s,a.wav\ny,?,,b.wav\n"
    assert format_manifest(parse_manifest(text)) == text
