# reference_ndcg.py
# Plain-Python NDCG@k and average precision over a LETOR file, used to
# cross-check the vectorized scorer. Usage:
#   python scripts/reference_ndcg.py FILE FEATURE_ID [K]
import math
import sys
from collections import OrderedDict


def dcg(grades, k):
    total = 0.0
    for position, grade in enumerate(grades[:k], start=1):
        total += (2 ** grade - 1) / math.log2(position + 1)
    return total


def ndcg(grades, k):
    ideal = dcg(sorted(grades, reverse=True), k)
    if ideal == 0:
        return 0.0
    return dcg(grades, k) / ideal


def average_precision(grades):
    hits = 0
    precisions = []
    for position, grade in enumerate(grades, start=1):
        if grade >= 1:
            hits += 1
            precisions.append(hits / position)
    if hits == 0:
        return 0.0
    return sum(precisions) / hits


def rank_by(scores, grades):
    # sorted() is stable, so ties keep file order
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    return [grades[i] for i in order]


def read_queries(path, feature_id):
    queries = OrderedDict()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            body = line.split("#", 1)[0].split()
            if not body:
                continue
            grade = int(body[0])
            qid = body[1][4:]
            value = 0.0
            for token in body[2:]:
                fid, raw = token.split(":", 1)
                if int(fid) == feature_id:
                    value = float(raw)
            queries.setdefault(qid, ([], []))
            queries[qid][0].append(value)
            queries[qid][1].append(grade)
    return queries


def mean_ndcg(queries, k):
    scores = [ndcg(rank_by(values, grades), k) for values, grades in queries.values()]
    return sum(scores) / len(scores)


if __name__ == "__main__":
    path, feature_id = sys.argv[1], int(sys.argv[2])
    k = int(sys.argv[3]) if len(sys.argv) > 3 else 10
    print(f"ndcg@{k} = {mean_ndcg(read_queries(path, feature_id), k):.6f}")
