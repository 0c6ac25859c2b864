import argparse

from ptmarket import convergence, normalise_trace

from util import *

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", type=int, nargs="+", default=[5, 10, 15])
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--g-max", type=int, default=20_000)
    args = parser.parse_args()

    wd = WorkingDirectory("_experiments", "convergence")
    config = default_config()
    frame = convergence(
        config,
        args.sizes,
        range(args.seeds),
        g_max=args.g_max,
        normalise=False,
        trace=True,
    )
    frame.to_csv(wd.file("convergence.csv"), index=False)

    # Compare the generations of the configuration to twice as many.
    plateau = min(config.g_max, args.g_max) - 1
    for n in args.sizes:
        values = frame[f"size_{n}"].to_numpy()
        change = abs(values[-1] - values[plateau]) / abs(values[-1])
        with out.Section(f"Size {n}"):
            out.kv("Fitness at the plateau", values[plateau])
            out.kv("Final fitness", values[-1])
            out.kv("Relative change", change)
            out.kv("Within 0.5%", change <= 0.005)

    plt.figure(figsize=(6, 4))
    for n in args.sizes:
        plt.plot(
            frame["generation"],
            normalise_trace(frame[f"size_{n}"]),
            label=f"{n} buyers, {n} sellers",
        )
    plt.xlabel("Generation")
    plt.ylabel("Normalised best fitness")
    tweak()
    plt.savefig(wd.file("convergence.pdf"))
