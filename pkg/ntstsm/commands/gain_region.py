import json

from ntstsm.commands import NtstsmCommand
from ntstsm.control import AdaptiveParams, SlidingParams
from ntstsm.gainlab import (
    StabilityQuery,
    ellipse_center,
    stability_report,
    sweep_region,
)


class Command(NtstsmCommand):
    def syntax(self):
        return "[--Gamma 1.0 ...] [--sweep region.csv]"

    def short_desc(self):
        return "Check tuning gains against the stability ellipse"

    def add_options(self, parser):
        super().add_options(parser)
        parser.add_argument("--Omega1", type=float)
        parser.add_argument("--Omega2", type=float)
        parser.add_argument("--gamma", type=float)
        parser.add_argument("--theta", type=float)
        parser.add_argument(
            "--Gamma", type=float, action="append", help="may be repeated"
        )
        parser.add_argument("--L", type=float, default=1.0)
        parser.add_argument("--V1-0", type=float, default=1.0, dest="V1_0")
        parser.add_argument("--sweep", help="write an (Omega1, Omega2) grid CSV")
        parser.add_argument("--grid", type=int, default=101)
        parser.add_argument("--out", help="StabilityReport JSON path")

    def run(self, args, opts):
        overrides = {
            k: getattr(opts, k)
            for k in ("Omega1", "Omega2", "gamma", "theta")
            if getattr(opts, k) is not None
        }
        p = SlidingParams.from_settings(self.settings, overrides)
        a = AdaptiveParams.from_settings(self.settings)
        eps_c = self.settings.getdict("NOISE").get("eps_c")
        Gammas = opts.Gamma or [1.0]
        reports = {}
        for Gamma in Gammas:
            q = StabilityQuery.from_params(p, Gamma, opts.L)
            report = stability_report(q, a, p, opts.V1_0, eps_c)
            reports[Gamma] = report
            state = "inside" if report.inside_ellipse else "OUTSIDE"
            print(
                f"Gamma={Gamma:g}: {state} the ellipse, margin={report.margin:.6g}, "
                f"lambda_min(Q_R)={report.lambda_min_Qr:.6g}"
            )
            if report.t_reach_bound is not None:
                print(f"  reaching-time bound {report.t_reach_bound:.6g} s")
            for note in report.notes:
                print(f"  note: {note}")
        if opts.out:
            with open(opts.out, "w") as f:
                if len(reports) == 1:
                    f.write(next(iter(reports.values())).to_json(indent=2))
                else:
                    data = {f"{G:g}": r.to_dict() for G, r in reports.items()}
                    json.dump(data, f, indent=2)
        if opts.sweep:
            omega1_c, omega2_c = ellipse_center(p.gamma, p.theta, max(Gammas))
            grid = {
                "Omega1_min": 0.0,
                "Omega1_max": 2.5 * omega1_c,
                "Omega2_min": 0.0,
                "Omega2_max": 2.5 * omega2_c,
                "n": opts.grid,
            }
            region = sweep_region(p.gamma, p.theta, Gammas, grid, opts.L)
            region.to_csv(opts.sweep, index=False)
            self.logger.info("Region sweep written to %s", opts.sweep)
