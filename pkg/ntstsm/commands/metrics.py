from ntstsm.commands import NtstsmCommand
from ntstsm.metrics import RunLog, compute_metrics


class Command(NtstsmCommand):
    def syntax(self):
        return "--log run.csv [--out metrics.json]"

    def short_desc(self):
        return "Compute tracking and effort metrics of a saved RunLog"

    def add_options(self, parser):
        super().add_options(parser)
        parser.add_argument("--log", required=True)
        parser.add_argument("--out")

    def run(self, args, opts):
        report = compute_metrics(RunLog.read_csv(opts.log))
        text = report.to_json(indent=2)
        if opts.out:
            with open(opts.out, "w") as f:
                f.write(text)
        print(text)
