from proxnest.experiment import format_summary, load_config, run_experiment

HELP = "simula a observação e roda nested sampling para o modelo configurado"


def add_arguments(p):
    p.add_argument("--config", required=True, help="arquivo JSON do experimento")
    p.add_argument("--output-dir", default=None, help="sobrescreve output_dir da config")
    p.add_argument("--seed-override", type=int, default=None, help="sobrescreve run.rng_seed")
    p.add_argument("--no-progress", action="store_true", help="desliga a barra de progresso")


def handle(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed_override, output_dir=args.output_dir)
    report = run_experiment(cfg, progress=not args.no_progress)
    print(format_summary(report))
    return 0
