"""Exercise the Python bindings end to end.

Build first:

    cargo build --release -p fragxsite-py --features extension-module

The script copies the built library next to a temporary import path, so no
install step is needed.
"""

import importlib
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module(tmp):
    for profile in ("release", "debug"):
        for name in ("libfragxsite_py.so", "libfragxsite_py.dylib"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                shutil.copy(lib, tmp / "fragxsite_py.so")
                sys.path.insert(0, str(tmp))
                return importlib.import_module("fragxsite_py")
    sys.exit("build the extension first: cargo build --release -p fragxsite-py --features extension-module")


def hollow_cube_pdb(half=7.0, step=1.5):
    lines = []
    n = int(2 * half / step) + 1
    serial = 1
    for i in range(n):
        for j in range(n):
            for k in range(n):
                x, y, z = (-half + i * step, -half + j * step, -half + k * step)
                if max(abs(x), abs(y), abs(z)) < half - 1e-9:
                    continue
                lines.append(
                    f"ATOM  {serial:>5}  CA  ALA A{serial % 10000:>4}    "
                    f"{x:>8.3f}{y:>8.3f}{z:>8.3f}  1.00  0.00           C"
                )
                serial += 1
    return "\n".join(lines) + "\nEND\n"


def main():
    with tempfile.TemporaryDirectory() as d:
        tmp = Path(d)
        fx = load_module(tmp)

        bonds = fx.cleavable_bonds("CC(=O)Nc1ccc(O)cc1")
        assert len(bonds) == 2, bonds
        frags = fx.fragment("CC(=O)Nc1ccc(O)cc1")
        assert len(frags) == 6, frags
        assert all(f["smiles"] for f in frags)
        whole = fx.fragment("c1ccccc1")
        assert [f["atom_indices"] for f in whole] == [[0, 1, 2, 3, 4, 5]]

        pockets = fx.find_pockets(hollow_cube_pdb())
        assert len(pockets) == 1, pockets
        assert all(abs(c) < 3.0 for c in pockets[0]["centroid"]), pockets[0]

        cfg = fx.Config("[model]\ngnn_hidden = 16\nembed_dim = 16\n[train]\nepochs = 3\nbatch_size = 8\n")
        assert "gnn_hidden = 16" in cfg.to_toml()
        try:
            fx.Config("[model]\nbogus = 1\n")
            raise AssertionError("unknown key accepted")
        except ValueError:
            pass

        data = fx.Dataset.synthetic(cfg, n_samples=40, n_proteins=4)
        assert len(data) == 40
        cache = tmp / "cache.bin"
        data.save(str(cache), cfg)
        assert len(fx.Dataset.load(str(cache), cfg)) == 40

        model = fx.Model(cfg)
        history = model.train(data)
        assert 1 <= history["best_epoch"] <= 3
        assert all(math.isfinite(e["train_loss"]) for e in history["epochs"])

        preds = model.predict(data, split="test")
        assert len(preds) == 4
        for p in preds:
            assert 0.0 < p["probability"] < 1.0
            assert abs(sum(p["fragment_scores"]) - 1.0) < 1e-6
            assert abs(sum(p["pocket_scores"]) - 1.0) < 1e-6
        metrics = model.evaluate(data)
        assert 0.0 <= metrics["auc"] <= 1.0

        drug, protein, _ = data.pairs()[0]
        out = model.explain(data, drug, protein, top_k=3)
        ranks = [f["rank"] for f in out["explanation"]["fragments"]]
        assert ranks == list(range(1, len(ranks) + 1)) and len(ranks) <= 3
        try:
            model.explain(data, "missing", protein)
            raise AssertionError("unknown pair accepted")
        except KeyError:
            pass

        run = tmp / "run"
        model.save(str(run))
        again = fx.Model.load(str(run))
        assert again.predict(data, split="test") == preds

    print("smoke test passed")


if __name__ == "__main__":
    main()
