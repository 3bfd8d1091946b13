import math

from matplotlib import pyplot as plt

from qswitch import TriggerParams
from qswitch.trigger import TriggerMode, analytic_trajectory, check_trigger_condition, numeric_evolve, trajectory_table

MASS = 1e-26
OMEGA = 2.0 * math.pi * 1e5


def plot_populations() -> None:
    params = TriggerParams.from_validity_factors(MASS, OMEGA)
    print(f"tau* = {params.tau_star:.6g} s, epsilon = {params.epsilon:.6g} s, A = {params.amplitude:.6g} m")

    numeric = trajectory_table(numeric_evolve(params, samples=201))
    analytic = trajectory_table(analytic_trajectory(params, 201))
    for mode in TriggerMode:
        print(check_trigger_condition(params, mode).table())

    fig, (pop, pos) = plt.subplots(2, 1, sharex=True)
    t = numeric["tau[s]"] / params.tau_star
    pop.plot(t, numeric["P_A1"], label="split-step")
    pop.plot(analytic["tau[s]"] / params.tau_star, analytic["P_A1"], "--", label="closed form")
    pop.set_ylabel("P(A1)")
    pop.set_xlim(1.0 - 3.0 * params.epsilon / params.tau_star, 1.0)
    pop.legend()
    pos.plot(t, numeric["x[m]"] / params.delta)
    pos.axhspan(0.0, 1.0, color="gray", alpha=0.3)
    pos.set_ylim(-1.0, 4.0)
    pos.set_xlabel("τ / τ*")
    pos.set_ylabel("<x> / Δ")
    plt.tight_layout()
    plt.show()


if __name__ == "__main__":
    plot_populations()
