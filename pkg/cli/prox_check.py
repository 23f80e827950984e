from proxnest.experiment import run_prox_checks

HELP = "verifica prox, adjuntos e projeções contra oráculos numéricos"


def add_arguments(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle-iters", type=int, default=20_000)


def handle(args) -> int:
    df = run_prox_checks(seed=args.seed, oracle_iters=args.oracle_iters)
    print(df.to_string(index=False))
    failed = df[~df["passed"]]
    if len(failed):
        print(f"{len(failed)} verificação(ões) falharam: {', '.join(failed['check'])}")
        return 2
    return 0
