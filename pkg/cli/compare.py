import json

from proxnest.experiment import compare_models, load_report

HELP = "fator de Bayes entre dois report.json da mesma observação"


def add_arguments(p):
    p.add_argument("report_a", help="report.json do modelo a")
    p.add_argument("report_b", help="report.json do modelo b")
    p.add_argument("--output", default=None, help="grava o registro de comparação neste JSON")


def handle(args) -> int:
    record = compare_models(load_report(args.report_a), load_report(args.report_b))
    text = json.dumps(record, ensure_ascii=False, indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0
