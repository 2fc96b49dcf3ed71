"""Straight-line recomputation of the vote mean, cluster share and node reward.

Deliberately shares no code with the package: plain integers, lists and
Fractions, one formula per function.
"""

from fractions import Fraction


def vote_mean(bits):
    """T = (sum of the binary votes) / (number of voters)."""
    return Fraction(sum(bits), len(bits))


def accepts(bits):
    return vote_mean(bits) >= Fraction(2, 3)


def cluster_share(portion_rewards, j):
    total = sum(portion_rewards, Fraction(0))
    if total == 0:
        return Fraction(1, len(portion_rewards))
    return Fraction(portion_rewards[j]) / total


def node_reward(cluster_reward, participants, deposit):
    return Fraction(cluster_reward) / participants + Fraction(deposit)


def expected_holdings(clusters, portion_rewards, penalty_fraction, endowment, deposits):
    """Balances after one settled transaction.

    ``clusters`` is a list of (device ids, bits) per cluster. Every device was
    endowed ``endowment`` and escrowed ``deposits[id]`` before voting.
    """
    total = sum(portion_rewards, Fraction(0))
    out = {}
    for j, (ids, bits) in enumerate(clusters):
        verdict = 1 if accepts(bits) else 0
        right = [d for d, b in zip(ids, bits) if b == verdict]
        reward = cluster_share(portion_rewards, j) * total
        for d, b in zip(ids, bits):
            dep = Fraction(deposits[d])
            if b == verdict:
                out[d] = endowment - dep + node_reward(reward, len(right), dep)
            else:
                out[d] = endowment - penalty_fraction * dep
    return out
