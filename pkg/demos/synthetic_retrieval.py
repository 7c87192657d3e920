"""
Retrieval on a synthetic archive
================================

Generates a small archive, indexes it, runs one query and scores all six
schemes with and without feature noise.
"""
import tempfile
from pathlib import Path

from recnn.retrieval import SCHEMES, build_index, evaluate_scheme, query_ranked
from recnn.synthgen import SynthConfig, generate_dataset

with tempfile.TemporaryDirectory() as tmp:
    for sigma in (0.0, 0.05, 0.5):
        cfg = SynthConfig(num_images=40, num_compositions=4, height=64, width=64, noise_sigma=sigma, seed=7)
        index = build_index(generate_dataset(cfg, Path(tmp) / f"s{sigma}"))

        if sigma == 0.05:
            print("top 5 for img0002 (recnn):")
            for rank, (image_id, d) in enumerate(query_ranked(index, "img0002", "recnn").top(5), start=1):
                print(f"  {rank} {image_id} {index.entry(image_id).class_label} {d:.4f}")

        print(f"\nsigma={sigma}")
        print(f"{'scheme':8s} {'ANMRR':>7s} {'mAP':>7s} {'P@5':>7s}")
        for scheme in SCHEMES:
            r = evaluate_scheme(index, scheme)
            print(f"{scheme:8s} {r.anmrr:7.4f} {r.map:7.4f} {r.p_at[5]:7.4f}")
