from dataclasses import replace

from ntstsm.commands import NtstsmCommand
from ntstsm.metrics import compute_metrics
from ntstsm.simlab import ExperimentConfig, run_experiment


class Command(NtstsmCommand):
    def syntax(self):
        return "--config <experiment> [--out run.csv]"

    def short_desc(self):
        return "Run one closed-loop experiment and write its RunLog"

    def add_options(self, parser):
        super().add_options(parser)
        parser.add_argument(
            "--config", required=True, help="experiment TOML or preset name"
        )
        parser.add_argument("--controller", help="override the controller")
        parser.add_argument("--seed", type=int, help="override the run seed")
        parser.add_argument("--master-seed", type=int, default=0)
        parser.add_argument("--out", help="RunLog CSV path")
        parser.add_argument("--metrics", help="MetricsReport JSON path")

    def run(self, args, opts):
        cfg = ExperimentConfig.load(opts.config, self.settings)
        if opts.controller:
            cfg = cfg.with_controller(opts.controller)
        if opts.seed is not None:
            cfg = replace(cfg, seed=opts.seed)
        log = run_experiment(cfg, self.settings, opts.master_seed)
        if opts.out:
            log.write_csv(opts.out, self.settings.getint("RUNLOG_SCHEMA_VERSION", 1))
            self.logger.info("RunLog written to %s", opts.out)
        report = compute_metrics(log)
        if opts.metrics:
            with open(opts.metrics, "w") as f:
                f.write(report.to_json(indent=2))
        print(report.to_json(indent=2))
