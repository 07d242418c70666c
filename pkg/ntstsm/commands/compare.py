from ntstsm.commands import NtstsmCommand, UsageError
from ntstsm.simlab import compare, load_configs


class Command(NtstsmCommand):
    def syntax(self):
        return "--configs <dir|file|preset> [--controllers a,b] [--out table.json]"

    def short_desc(self):
        return "Run several experiments in parallel and tabulate their metrics"

    def add_options(self, parser):
        super().add_options(parser)
        parser.add_argument("--configs", required=True)
        parser.add_argument(
            "--controllers",
            help="comma-separated controllers, each run on every config",
        )
        parser.add_argument("--reference", help="controller row used for margins")
        parser.add_argument("--workers", type=int)
        parser.add_argument("--master-seed", type=int, default=0)
        parser.add_argument("--out", help="table path (.json or .csv)")

    def run(self, args, opts):
        cfgs = load_configs(opts.configs, self.settings)
        if opts.controllers:
            names = [c.strip() for c in opts.controllers.split(",") if c.strip()]
            if not names:
                raise UsageError("--controllers names no controller")
            multi = len(cfgs) > 1
            cfgs = [
                cfg.with_controller(c, f"{cfg.name}/{c}" if multi else c)
                for cfg in cfgs
                for c in names
            ]
        table, _ = compare(
            cfgs,
            self.settings,
            master_seed=opts.master_seed,
            workers=opts.workers,
            reference=opts.reference,
        )
        if opts.out:
            if opts.out.endswith(".csv"):
                table.to_csv(opts.out)
            else:
                table.to_json(opts.out, orient="index", indent=2)
            self.logger.info("Comparison table written to %s", opts.out)
        print(table.drop(columns="error").to_string(float_format="%.4g"))
        failed = table["error"].dropna()
        for name, message in failed.items():
            print(f"{name}: {message}")
