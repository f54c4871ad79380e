"""Small end-to-end run of the Python bindings.

Build and install first:
    pip install maturin
    pip install --no-build-isolation -e crates/python
"""

import math
import tempfile
from pathlib import Path

import poronlmc


def main():
    lines = poronlmc.generate_fractures(seed=7, count=6)
    assert len(lines) == 6
    assert lines == poronlmc.generate_fractures(seed=7, count=6)

    cfg = poronlmc.Config()
    cfg.set_grid(24, 24, 4, 4)
    cfg.set_steps(4)
    cfg.layers = [1, 2]
    cfg.fractures = None
    cfg.validate()
    assert poronlmc.Config.from_toml(cfg.to_toml()).to_toml() == cfg.to_toml()

    plain = poronlmc.Problem(cfg)
    assert plain.n_segments == 0
    assert plain.fine_dofs == plain.n_cells + 2 * plain.n_vertices

    problem = poronlmc.Problem.with_fractures(cfg, lines)
    print(f"fine DOFs {problem.fine_dofs}, coarse DOFs {problem.coarse_dofs}, segments {problem.n_segments}")

    fine = problem.run_fine()
    assert len(fine.averages) == cfg.n_steps
    p_m, p_f, ux, uy = problem.split(fine.final_state)
    assert len(p_m) == problem.n_cells and len(ux) == problem.n_vertices
    assert all(math.isfinite(v) for v in fine.final_state)

    errors = []
    for s in cfg.layers:
        model = problem.coarse_model(s)
        dofs, values = model.basis(0)
        assert len(dofs) == len(values) > 0
        states = model.run()
        assert len(states) == cfg.n_steps
        fine_field = model.reconstruct(states[-1])
        assert len(fine_field) == problem.fine_dofs
        e = model.errors(fine)
        print(f"s={s}: e_p={e[0]:.4f}% e_ux={e[1]:.4f}% e_uy={e[2]:.4f}%")
        errors.append(e)
    assert errors[1][1] < errors[0][1], "more layers should help"

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "lines.txt"
        path.write_text("# one line\n0.1 0.1 0.9 0.8\n")
        assert poronlmc.read_fractures(path) == [[(0.1, 0.1), (0.9, 0.8)]]
        cfg.fractures = path
        cfg.out_dir = tmp
        rows = poronlmc.compare(cfg)
        assert [r["s"] for r in rows] == [1, 2]
        cfg.fractures = Path(tmp) / "missing.txt"
        try:
            poronlmc.compare(cfg)
        except ValueError as err:
            print(f"missing file rejected: {err}")
        else:
            raise AssertionError("missing fracture file accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
