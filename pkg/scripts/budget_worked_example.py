"""Print the context budget for a 5-minute clip, pooled vs. raw frames."""

import argparse

from povpool.interleave import BudgetParams, estimate_budget, plan_subsample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seconds", type=int, default=300)
    ap.add_argument("--s-max", type=int, default=60)
    ap.add_argument("--m", type=int, default=256)
    ap.add_argument("--sys-tokens", type=int, default=128)
    ap.add_argument("--text-per-second", type=int, default=10)
    ap.add_argument("--fps", type=int, default=24)
    args = ap.parse_args()

    plan = plan_subsample(args.seconds, args.s_max)
    params = BudgetParams(m=args.m, n_sys_q=args.sys_tokens, default_text=args.text_per_second)
    rep = estimate_budget(plan, params, fps=args.fps)

    print(f"kept seconds K = {plan.K} of S = {plan.S} (first {plan.indices[:3]}, last {plan.indices[-1:]})")
    pooled = f"{args.sys_tokens} + {rep.text_tokens} + {plan.K}*{args.m}"
    unpooled = f"{args.sys_tokens} + {rep.text_tokens} + {plan.K}*{args.fps}*{args.m}"
    width = max(len(pooled), len(unpooled))
    print(f"pooled   = {pooled:<{width}} = {rep.pooled:,}")
    print(f"unpooled = {unpooled:<{width}} = {rep.unpooled:,}")
    print(f"ratio    = {rep.ratio:.3f}  ({rep.ratio_label})")


if __name__ == "__main__":
    main()
