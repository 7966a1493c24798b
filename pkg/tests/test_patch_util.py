import json

import numpy as np
import pandas as pd
import pytest
import torch

from PatchUtils import PatchUtil, StripesDS
from src.errors import ParameterError, ShapeError


def test_matrix_csv_full_precision(tmp_path, rng):
    mat = rng.standard_normal((4, 4))
    path = str(tmp_path / "m.csv")
    PatchUtil.write_matrix(mat, path)
    np.testing.assert_array_equal(PatchUtil.read_matrix(path), mat)


def test_single_row_is_vector(tmp_path):
    path = tmp_path / "row.csv"
    path.write_text("1,2,3,4\n")
    vec = PatchUtil.read_matrix(str(path))
    assert vec.shape == (4,)
    assert PatchUtil.read_patch(str(path)).shape == (1, 4)


def test_bad_matrix_files(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,x\n")
    with pytest.raises(ShapeError):
        PatchUtil.read_matrix(str(path))
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ShapeError):
        PatchUtil.read_matrix(str(empty))
    with pytest.raises(OSError):
        PatchUtil.write_matrix(np.ones((2, 2)), str(tmp_path / "nowhere" / "m.csv"))


def test_read_patch_json(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps([[1, 2], [3, 4]]))
    np.testing.assert_array_equal(PatchUtil.read_patch(str(path)), [[1.0, 2.0], [3.0, 4.0]])
    path.write_text(json.dumps([1, 2, 3]))
    with pytest.raises(ShapeError):
        PatchUtil.read_patch(str(path))


def test_write_json_sorted(tmp_path):
    path = tmp_path / "r.json"
    PatchUtil.write_json({'b': 1, 'a': [1.5]}, str(path))
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {'a': [1.5], 'b': 1}


def test_stripe_patch_orientation():
    rng = np.random.default_rng(0)
    horizontal = PatchUtil.stripe_patch(8, False, 4, 0, rng, noise_std=0.0)
    vertical = PatchUtil.stripe_patch(8, True, 4, 0, rng, noise_std=0.0)
    assert np.all(horizontal == horizontal[:, :1])
    assert np.all(vertical == vertical[:1, :])
    np.testing.assert_array_equal(vertical, horizontal.T)


def test_make_stripes():
    patches, labels = PatchUtil.make_stripes(10, size=8, seed=1)
    assert patches.shape == (10, 8, 8)
    assert labels.tolist() == [0, 1] * 5
    again, _ = PatchUtil.make_stripes(10, size=8, seed=1)
    np.testing.assert_array_equal(patches, again)


def test_stripes_dataset():
    data = StripesDS(6, size=4, seed=0)
    assert len(data) == 6
    patch, label = data[1]
    assert isinstance(patch, torch.Tensor)
    assert patch.shape == (1, 4, 4)
    assert patch.dtype == torch.float64
    assert label == 1


def test_make_stripes_rejects_bad_sizes():
    with pytest.raises(ParameterError):
        PatchUtil.make_stripes(-3)
    with pytest.raises(ParameterError):
        StripesDS(4, size=1)
    assert len(StripesDS(0)) == 0


def test_write_frame(tmp_path):
    path = tmp_path / "trace.csv"
    PatchUtil.write_frame(pd.DataFrame({'epoch': [1, 2], 'loss': [0.5, 0.25]}), str(path))
    assert path.read_text().splitlines() == ['epoch,loss', '1,0.5', '2,0.25']
    with pytest.raises(OSError):
        PatchUtil.write_frame(pd.DataFrame({'a': [1]}), str(tmp_path / "nowhere" / "t.csv"))
