import json
import os
import tempfile

import numpy as np
import torch
from torch.utils.data import Dataset

from config.hwt_config import FLOAT_FORMAT, TRAIN_NOISE_STD
from src.errors import ParameterError, ShapeError


class PatchUtil():
  # ----------------------------
  # Load a real matrix from a CSV file (comma separated, no header).
  # A single-row file is returned as a 1D vector.
  # ----------------------------
  @staticmethod
  def read_matrix(csv_file):
    try:
      mat = np.loadtxt(csv_file, delimiter=',', dtype=np.float64, ndmin=2)
    except ValueError as exc:
      raise ShapeError(f"could not parse {csv_file} as a numeric matrix: {exc}") from None
    if mat.size == 0:
      raise ShapeError(f"{csv_file} contains no values")
    if mat.shape[0] == 1:
      return mat[0]
    return mat

  # ----------------------------
  # Write a vector or matrix as CSV with full precision ('%.17g') so that
  # values round-trip exactly. Written atomically: temp file, then rename.
  # ----------------------------
  @staticmethod
  def write_matrix(mat, csv_file):
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    PatchUtil._atomic_write(csv_file,
                            lambda handle: np.savetxt(handle, mat, delimiter=',', fmt=FLOAT_FORMAT))

  # ----------------------------
  # Load a patch given either as CSV rows or as a JSON array of arrays
  # ----------------------------
  @staticmethod
  def read_patch(path):
    if path.lower().endswith('.json'):
      with open(path, 'r') as handle:
        try:
          patch = np.asarray(json.load(handle), dtype=np.float64)
        except (TypeError, ValueError) as exc:
          raise ShapeError(f"{path} is not a JSON array of numeric rows: {exc}") from None
    else:
      patch = np.atleast_2d(PatchUtil.read_matrix(path))
    if patch.ndim != 2:
      raise ShapeError(f"{path} must hold a 2D array, got shape {patch.shape}")
    return patch

  # ----------------------------
  # Dump a report as sorted-key JSON (byte-identical for identical input)
  # ----------------------------
  @staticmethod
  def write_json(doc, json_file):
    PatchUtil._atomic_write(json_file,
                            lambda handle: handle.write(PatchUtil.dumps(doc) + '\n'))

  # ----------------------------
  # Write a DataFrame (loss traces, sweep tables) as CSV without the index
  # ----------------------------
  @staticmethod
  def write_frame(frame, csv_file):
    PatchUtil._atomic_write(csv_file,
                            lambda handle: frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT))

  @staticmethod
  def dumps(doc):
    return json.dumps(doc, sort_keys=True, indent=2)

  @staticmethod
  def _atomic_write(path, writer):
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
      raise OSError(f"The path {directory} is not a valid directory.")
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix='.tmp')
    try:
      with os.fdopen(fd, 'w') as handle:
        writer(handle)
      os.replace(tmp_path, path)
    except BaseException:
      if os.path.exists(tmp_path):
        os.remove(tmp_path)
      raise

  # ----------------------------
  # One square stripe pattern: +1/-1 bands of a given period along rows
  # (horizontal stripes) or along columns (vertical stripes), with a phase
  # shift and additive gaussian noise.
  # ----------------------------
  @staticmethod
  def stripe_patch(size, vertical, period, phase, rng, noise_std=TRAIN_NOISE_STD):
    idx = (np.arange(size) + phase) % period
    profile = np.where(idx < period // 2, 1.0, -1.0)
    if vertical:
      patch = np.tile(profile, (size, 1))
    else:
      patch = np.tile(profile[:, None], (1, size))
    return patch + noise_std * rng.standard_normal((size, size))

  # ----------------------------
  # Balanced two-class stripes set: label 0 = horizontal, 1 = vertical
  # ----------------------------
  @staticmethod
  def make_stripes(n_samples, size=8, seed=0, noise_std=TRAIN_NOISE_STD):
    if int(n_samples) != n_samples or n_samples < 0:
      raise ParameterError(f"n_samples must be a non-negative integer, got {n_samples}")
    if int(size) != size or size < 2:
      raise ParameterError(f"stripe patches need an integer size >= 2, got {size}")
    rng = np.random.default_rng(seed)
    periods = [p for p in (2, 4, 8) if p <= size]
    patches = np.empty((n_samples, size, size))
    labels = np.empty(n_samples, dtype=np.int64)
    for idx in range(n_samples):
      vertical = idx % 2
      period = periods[rng.integers(len(periods))]
      phase = int(rng.integers(period))
      patches[idx] = PatchUtil.stripe_patch(size, vertical, period, phase, rng, noise_std)
      labels[idx] = vertical
    return patches, labels


# ----------------------------
# Stripes Dataset
# ----------------------------
class StripesDS(Dataset):
  def __init__(self, n_samples, size=8, seed=0, noise_std=TRAIN_NOISE_STD):
    self.patches, self.labels = PatchUtil.make_stripes(n_samples, size=size, seed=seed,
                                                       noise_std=noise_std)

  # ----------------------------
  # Number of items in dataset
  # ----------------------------
  def __len__(self):
    return len(self.labels)

  # ----------------------------
  # Get i'th item in dataset: a (1, size, size) float64 tensor and its class id
  # ----------------------------
  def __getitem__(self, idx):
    patch = torch.from_numpy(self.patches[idx][np.newaxis, :, :].copy())
    return patch, int(self.labels[idx])
