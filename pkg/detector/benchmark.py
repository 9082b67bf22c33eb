import logging
import platform
from dataclasses import asdict, dataclass, field
from time import perf_counter
from typing import List, Optional

import gin
import numpy as np
import torch

from .audio import CLIP_LEN
from .layers import EVAL
from .lfcc import LfccConfig, lfcc

"""
CPU inference latency of SpecRNet, per batch size

Only the eval-mode forward call is timed (monotonic clock); the LFCC
front-end is timed separately on request.
"""

BENCH_FRAMES = 402  # LFCC frames of a 64600-sample clip
# published CPU latencies of SpecRNet (ms), for side-by-side logging only
REFERENCE_CPU_MS = {1: 27.358, 16: 370.843, 32: 706.300}
REFERENCE_PARAMETERS = {"SpecRNet": 277963, "LCNN": 467425, "RawNet2": 17620385}


@dataclass
class BenchRow:
    batch_size: int
    iterations: int
    mean_ms: float
    std_ms: float
    lfcc_mean_ms: Optional[float] = None


@dataclass
class BenchReport:
    device: str
    rows: List[BenchRow] = field(default_factory=list)

    def to_list(self):
        """JSON-ready rows"""
        return [asdict(row) for row in self.rows]


def device_label():
    return f"cpu ({platform.processor() or platform.machine()}, {torch.get_num_threads()} threads)"


def time_calls(func, iterations, warmup=0):
    """Milliseconds of each of -iterations calls of func(), after -warmup calls

    Returns:
        (float array): one duration per timed call
    """
    for _ in range(warmup):
        func()
    durations = np.empty(iterations)
    for idx in range(iterations):
        start = perf_counter()
        func()
        durations[idx] = (perf_counter() - start) * 1000
    return durations


@gin.configurable
def bench_inference(model, batch_sizes=(1, 16, 32), iterations=1000, measure_lfcc=False,
                    warmup=10, seed=0, n_frames=BENCH_FRAMES):
    """Times eval-mode forward passes on seeded random feature batches

    model (SpecRNet): model to time, left untouched
    batch_sizes (int list): one report row per batch size
    iterations (int): timed forward calls per batch size
    measure_lfcc (bool): also time the front-end on random 64600-sample batches

    Returns:
        (BenchReport): mean and (population) std latency per batch size
    """
    report = BenchReport(device_label())
    gen = torch.Generator().manual_seed(seed)
    cfg = model.cfg
    for batch_size in batch_sizes:
        features = torch.randn(
            batch_size, cfg.input_channels, cfg.input_coeffs, n_frames,
            generator=gen, dtype=model.dtype,
        )
        with torch.no_grad():
            durations = time_calls(lambda: model.forward(features, EVAL), iterations, warmup)
        lfcc_mean = None
        if measure_lfcc:
            waves = torch.rand(batch_size, CLIP_LEN, generator=gen).numpy() * 2 - 1
            lfcc_cfg = LfccConfig()
            lfcc_mean = float(time_calls(lambda: lfcc(waves, lfcc_cfg), iterations, warmup).mean())
        row = BenchRow(
            batch_size, iterations, float(durations.mean()), float(durations.std()), lfcc_mean
        )
        report.rows.append(row)
        logging.info(
            f"batch {batch_size}: {row.mean_ms:.3f} ms +- {row.std_ms:.3f} "
            f"over {iterations} forwards"
        )
    return report


def log_reference(report):
    """logs the published CPU latencies next to the measured ones"""
    for row in report.rows:
        reference = REFERENCE_CPU_MS.get(row.batch_size)
        shown = f"{reference:.3f} ms" if reference is not None else "n/a"
        logging.info(
            f"batch {row.batch_size}: measured {row.mean_ms:.3f} ms, published {shown}"
        )
