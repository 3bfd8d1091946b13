import math

import polars as pl

from qswitch import AmplitudeModel, run_switch
from qswitch.hilbert import Factor, entanglement_entropy
from qswitch.switch_model import DiagonalBasis, postselect

pl.Config.set_tbl_cols(16)
pl.Config.set_tbl_rows(16)


def show(title: str, alpha: tuple[complex, ...], model: AmplitudeModel) -> None:
    outcome = run_switch(alpha, model)
    print(f"== {title}")
    print(outcome.table(DiagonalBasis.AGENTS).select("zeta", "probability", "sign", "p_sign", "e2.re", "e3.re", "e4.re", "e5.re"))
    post, p = postselect(outcome, 3)
    if p > 0.0:
        print(f"path/target entanglement after postselection: {entanglement_entropy(post, [Factor.TARGET]):.4f} bits")


if __name__ == "__main__":
    show("ideal agents, photon e1", (1.0, 0.0, 0.0, 0.0, 0.0), AmplitudeModel())
    show("ideal agents, photon e4", (0.0, 0.0, 0.0, 1.0, 0.0), AmplitudeModel())
    s = 1 / math.sqrt(2)
    lossy = AmplitudeModel(c1A=0.9, c1B=0.8j, c2B=0.95, f_BA=0.7, f_AB=0.7, delta_A=0.4, delta_B=1.1)
    show("lossy agents, photon (e1 + e4)/√2", (s, 0.0, 0.0, s, 0.0), lossy)
