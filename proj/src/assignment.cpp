#include "ncd/assignment.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>

#include "ncd/error.hpp"

namespace ncd {
namespace {

using Int = std::int64_t;

struct SquareSolution {
    std::vector<int> row_to_col;
    std::vector<std::vector<char>> tight;  // reduced cost zero under the optimal potentials
};

// Kuhn-Munkres (shortest augmenting path with potentials) minimizing cost on an n x n matrix.
SquareSolution solve_min_cost(const std::vector<std::vector<Int>>& cost) {
    const int n = static_cast<int>(cost.size());
    constexpr Int kInf = std::numeric_limits<Int>::max() / 4;
    std::vector<Int> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<Int> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            Int delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const Int cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    SquareSolution sol;
    sol.row_to_col.assign(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (p[j] != 0) sol.row_to_col[p[j] - 1] = j - 1;
    }
    sol.tight.assign(n, std::vector<char>(n, 0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) sol.tight[i][j] = cost[i][j] - u[i + 1] - v[j + 1] == 0;
    }
    return sol;
}

// Re-routes an optimal matching, within the tight subgraph, to the row-lexicographically
// smallest optimal matching over the first `rows` rows.
void lexicographic_refine(SquareSolution& sol, int rows) {
    const int n = static_cast<int>(sol.row_to_col.size());
    std::vector<int>& match_r = sol.row_to_col;
    std::vector<int> match_c(n, -1);
    for (int i = 0; i < n; ++i) match_c[match_r[i]] = i;
    std::vector<char> row_fixed(n, 0), col_fixed(n, 0), visited(n, 0);

    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!sol.tight[i][j]) continue;
            if (match_r[i] == j) break;
            if (col_fixed[j]) continue;
            const int owner = match_c[j];
            const int freed = match_r[i];
            std::fill(visited.begin(), visited.end(), 0);
            std::function<bool(int)> reroute = [&](int r) -> bool {
                visited[r] = 1;
                for (int c = 0; c < n; ++c) {
                    if (!sol.tight[r][c] || c == j || col_fixed[c]) continue;
                    if (c == freed) {
                        match_r[r] = c;
                        match_c[c] = r;
                        return true;
                    }
                    const int next = match_c[c];
                    if (next == i || next == r || row_fixed[next] || visited[next]) continue;
                    if (reroute(next)) {
                        match_r[r] = c;
                        match_c[c] = r;
                        return true;
                    }
                }
                return false;
            };
            if (reroute(owner)) {
                match_r[i] = j;
                match_c[j] = i;
                break;
            }
        }
        row_fixed[i] = 1;
        col_fixed[match_r[i]] = 1;
    }
}

}  // namespace

std::vector<int> max_weight_matching(const CountMatrix& weights) {
    const int rows = static_cast<int>(weights.rows());
    const int cols = static_cast<int>(weights.cols());
    if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
    if (weights.minCoeff() < 0) throw DomainError("max_weight_matching: negative weight");

    const int n = std::max(rows, cols);
    const Int top = weights.maxCoeff();
    std::vector<std::vector<Int>> cost(n, std::vector<Int>(n, top));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) cost[r][c] = top - weights(r, c);
    }
    SquareSolution sol = solve_min_cost(cost);
    lexicographic_refine(sol, rows);

    std::vector<int> out(rows, -1);
    for (int r = 0; r < rows; ++r) {
        const int c = sol.row_to_col[r];
        if (c < cols && weights(r, c) > 0) out[r] = c;
    }
    return out;
}

ConfusionCounts build_confusion(std::span<const FeatureRecord> gt_novel, const PrototypeSet& protos,
                                SimilarityMetric metric) {
    if (gt_novel.empty()) throw DomainError("build_confusion: no GT features, mapping is undefined");
    if (protos.num_novel() < 1) throw DomainError("build_confusion: prototype set has no clusters");

    std::set<ClassId> labels;
    for (std::size_t i = 0; i < gt_novel.size(); ++i) {
        if (gt_novel[i].source != Source::GT || !gt_novel[i].gt_class) {
            throw DomainError("build_confusion: record " + std::to_string(i) + " is not a labeled GT record");
        }
        labels.insert(*gt_novel[i].gt_class);
    }
    ConfusionCounts out;
    out.label_ids.assign(labels.begin(), labels.end());
    out.cluster_count = static_cast<int>(protos.num_novel());
    out.counts = CountMatrix::Zero(static_cast<Eigen::Index>(labels.size()), protos.num_novel());

    std::map<ClassId, Eigen::Index> row_of;
    for (std::size_t r = 0; r < out.label_ids.size(); ++r) row_of[out.label_ids[r]] = static_cast<Eigen::Index>(r);
    for (const auto& rec : gt_novel) {
        if (rec.feature.size() != protos.dim) throw DomainError("build_confusion: feature dimension mismatch");
        const Vector f = l2_normalize(rec.feature);
        const Eigen::Index j = argmax_first(similarities(f, protos.novel, metric));
        ++out.counts(row_of[*rec.gt_class], j);
    }
    return out;
}

LabelMapping hungarian_assign(const ConfusionCounts& counts) {
    LabelMapping mapping;
    mapping.method = MappingMethod::Hungarian;
    const auto match = max_weight_matching(counts.counts);
    for (std::size_t r = 0; r < match.size(); ++r) {
        if (match[r] >= 0) mapping.entries[match[r]] = counts.label_ids[r];
    }
    return mapping;
}

LabelMapping embedding_assign(const PrototypeSet& protos, std::span<const LabeledBox> boxes, int kappa) {
    if (kappa <= 0) throw DomainError("embedding_assign: kappa must be positive");
    LabelMapping mapping;
    mapping.method = MappingMethod::Embedding;
    mapping.kappa = kappa;
    if (protos.num_novel() == 0) return mapping;

    struct Member {
        Scalar d2;
        std::size_t index;
        ClassId label;
    };
    std::vector<std::vector<Member>> members(static_cast<std::size_t>(protos.num_novel()));
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (boxes[i].feature.size() != protos.dim) throw DomainError("embedding_assign: feature dimension mismatch");
        const Vector f = l2_normalize(boxes[i].feature);
        Scalar d2 = 0;
        const Eigen::Index j = nearest_column(f, protos.novel, &d2);
        members[j].push_back({d2, i, boxes[i].embedding_label});
    }
    for (std::size_t j = 0; j < members.size(); ++j) {
        auto& m = members[j];
        if (m.empty()) continue;
        std::sort(m.begin(), m.end(), [](const Member& a, const Member& b) {
            return a.d2 != b.d2 ? a.d2 < b.d2 : a.index < b.index;
        });
        if (m.size() > static_cast<std::size_t>(kappa)) m.resize(kappa);
        std::map<ClassId, int> votes;
        for (const auto& x : m) ++votes[x.label];
        auto best = votes.begin();
        for (auto it = votes.begin(); it != votes.end(); ++it) {
            if (it->second > best->second) best = it;
        }
        mapping.entries[static_cast<std::int32_t>(j)] = best->first;
    }
    return mapping;
}

std::vector<ClassId> nearest_text_label(std::span<const Vector> box_embeddings,
                                        std::span<const TextEmbedding> text_embeddings) {
    if (text_embeddings.empty()) throw DomainError("nearest_text_label: no text embeddings");
    std::vector<std::size_t> order(text_embeddings.size());
    for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return text_embeddings[a].class_id < text_embeddings[b].class_id;
    });
    const Eigen::Index dim = text_embeddings.front().embedding.size();
    std::vector<Vector> texts;
    for (std::size_t t : order) {
        if (text_embeddings[t].embedding.size() != dim) throw DomainError("nearest_text_label: text dimension mismatch");
        texts.push_back(l2_normalize(text_embeddings[t].embedding));
    }

    std::vector<ClassId> out;
    out.reserve(box_embeddings.size());
    for (const auto& e : box_embeddings) {
        if (e.size() != dim) throw DomainError("nearest_text_label: box embedding dimension mismatch");
        const Vector b = l2_normalize(e);
        std::size_t best = 0;
        Scalar best_sim = -std::numeric_limits<Scalar>::infinity();
        for (std::size_t t = 0; t < texts.size(); ++t) {
            const Scalar s = b.dot(texts[t]);
            if (s > best_sim) {
                best_sim = s;
                best = t;
            }
        }
        out.push_back(text_embeddings[order[best]].class_id);
    }
    return out;
}

std::vector<Detection> apply_mapping(std::vector<Detection> dets, const LabelMapping& mapping) {
    for (auto& d : dets) {
        if (d.label.kind == LabelKind::Base) {
            d.label = Label::mapped(d.label.id);
        } else if (d.label.kind == LabelKind::Cluster) {
            if (auto cls = mapping.lookup(d.label.id)) {
                d.label = Label::mapped(*cls);
            } else {
                d.label = Label::unmapped(d.label.id);
            }
        }
    }
    return dets;
}

}  // namespace ncd
