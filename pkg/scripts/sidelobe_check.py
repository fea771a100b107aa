"""Peak sidelobe level of a single-tone CIR with and without device artifacts."""

import numpy as np

from wifiradar import scenes as S
from wifiradar.cir_builder import build_cir
from wifiradar.config import PreprocessConfig
from wifiradar.preprocess import preprocess_series
from wifiradar.scene_sim import SceneConfig, simulate

EXCLUDE_S = 20e-9  # Blackman main lobe half-width for 2025 subcarriers, rounded up


def sidelobe_db(snapshot):
    cir = build_cir(snapshot)
    mag = np.abs(cir.values)
    ip = int(np.argmax(mag))
    step = cir.delay_grid_s[1] - cir.delay_grid_s[0]
    n = mag.size
    d = ((np.arange(n) - ip + n // 2) % n - n // 2) * step
    return 20 * np.log10(mag[np.abs(d) > EXCLUDE_S].max() / mag[ip])


def main():
    clean = SceneConfig(duration_s=0.005, target_gain_db=None)
    dirty = SceneConfig(duration_s=0.005, target_gain_db=None, artifacts=S.device_artifacts())
    rows = [
        ("clean, edge equalization off", clean, PreprocessConfig(edge_equalization=False)),
        ("clean, full preprocessing", clean, PreprocessConfig()),
        ("artifacts, no preprocessing", dirty, PreprocessConfig.disabled()),
        ("artifacts, full preprocessing", dirty, PreprocessConfig()),
    ]
    for label, scene, cfg in rows:
        s = preprocess_series(simulate(scene).series, cfg)
        print(f"{label:32s} {sidelobe_db(s[0]):7.1f} dB")


if __name__ == "__main__":
    main()
