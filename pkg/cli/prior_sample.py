from proxnest.experiment import load_config, run_prior_sampling

HELP = "amostras do prior do modelo (sem restrição de verossimilhança)"


def add_arguments(p):
    p.add_argument("--config", required=True, help="arquivo JSON do experimento")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--seed-override", type=int, default=None)
    p.add_argument("--n-samples", type=int, default=None, help="padrão: run.n_live")


def handle(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed_override, output_dir=args.output_dir)
    df = run_prior_sampling(cfg, n_samples=args.n_samples)
    print(df.describe().to_string())
    return 0
