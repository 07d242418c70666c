from ntstsm.commands import NtstsmCommand
from ntstsm.rigidbody import forward_kinematics, load_chain
from ntstsm.simlab import ExperimentConfig


class Command(NtstsmCommand):
    def syntax(self):
        return "--config <experiment> --out trajectory.csv"

    def short_desc(self):
        return "Sample the desired trajectory of an experiment"

    def add_options(self, parser):
        super().add_options(parser)
        parser.add_argument("--config", required=True)
        parser.add_argument("--out", required=True)
        parser.add_argument("--dt", type=float, help="sampling step (default: run dt)")

    def run(self, args, opts):
        cfg = ExperimentConfig.load(opts.config, self.settings)
        q0 = self.settings["INITIAL_Q"] if cfg.initial_q is None else cfg.initial_q
        start = forward_kinematics(load_chain(cfg.chain), q0)
        trajectory = cfg.build_trajectory(start)
        dt = opts.dt or cfg.dt
        trajectory.export_csv(opts.out, dt, max(trajectory.t_end, cfg.duration))
        self.logger.info(
            "%d samples written to %s",
            int(round(max(trajectory.t_end, cfg.duration) / dt)) + 1,
            opts.out,
        )
