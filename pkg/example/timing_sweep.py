import numpy as np
import polars as pl
from matplotlib import pyplot as plt

from qswitch import CentralBody, solve_matching
from qswitch.timing import near_surface_duration, small_mass_duration

D = 0.3e-6


def plot_earth() -> None:
    body = CentralBody.earth()
    heights = np.geomspace(0.1, 100.0, 40)
    solutions = [solve_matching(body, h, D) for h in heights]
    df = pl.DataFrame(
        {
            "h[m]": heights,
            "dt_r[s]": [s.dt_r for s in solutions],
            "near_surface[s]": [near_surface_duration(body, h, D) for h in heights],
            "relative_gap": [s.relative_gap for s in solutions],
        },
    )
    print(df.head())

    fig, (ax, gap) = plt.subplots(1, 2, figsize=(10, 4))
    ax.loglog(df["h[m]"], df["dt_r[s]"], label="exact")
    ax.loglog(df["h[m]"], df["near_surface[s]"], "--", label="cR²d/GMh")
    ax.set_xlabel("h [m]")
    ax.set_ylabel("Δt_r [s]")
    ax.legend()
    gap.semilogx(df["h[m]"], df["relative_gap"])
    gap.set_xlabel("h [m]")
    gap.set_ylabel("weak-field / exact - 1")
    plt.tight_layout()
    plt.show()


def print_small_mass() -> None:
    body = CentralBody.small_mass()
    d = body.radius
    solution = solve_matching(body, 1e-7, d)
    print(f"small mass: dt_r = {solution.dt_r:.6g} s (cRd/GM = {small_mass_duration(body, d):.6g} s), regime {solution.regime}")


if __name__ == "__main__":
    print_small_mass()
    plot_earth()
