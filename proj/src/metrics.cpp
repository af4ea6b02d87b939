#include "actionkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "actionkit/error.hpp"
#include "actionkit/sequence_matcher.hpp"
#include "actionkit/text.hpp"

namespace actionkit {

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

std::string join_ngram(const Tokens& tokens, std::size_t start, int n) {
    std::string key;
    for (int k = 0; k < n; ++k) {
        if (k > 0) key += '\x1f';
        key += tokens[start + static_cast<std::size_t>(k)];
    }
    return key;
}

std::size_t ngram_total(const Tokens& tokens, int n) {
    auto un = static_cast<std::size_t>(n);
    return tokens.size() >= un ? tokens.size() - un + 1 : 0;
}

NgramCounts count_ngrams(const Tokens& tokens, int n) {
    NgramCounts counts;
    std::size_t total = ngram_total(tokens, n);
    for (std::size_t i = 0; i < total; ++i) ++counts[join_ngram(tokens, i, n)];
    return counts;
}

std::size_t clipped_overlap(const NgramCounts& pred, const NgramCounts& ref) {
    std::size_t overlap = 0;
    for (const auto& [gram, count] : pred) {
        auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

std::size_t closest_ref_length(std::size_t hyp_len, const std::vector<Tokens>& refs) {
    std::size_t best = refs.front().size();
    for (const auto& ref : refs) {
        std::size_t len = ref.size();
        auto diff = [hyp_len](std::size_t l) { return l > hyp_len ? l - hyp_len : hyp_len - l; };
        if (diff(len) < diff(best) || (diff(len) == diff(best) && len < best)) best = len;
    }
    return best;
}

double brevity_penalty(double hyp_len, double ref_len) {
    if (hyp_len > ref_len) return 1.0;
    if (hyp_len == 0.0) return 0.0;
    return std::exp(1.0 - ref_len / hyp_len);
}

RougeScore from_counts(std::size_t overlap, std::size_t pred_total, std::size_t ref_total) {
    RougeScore s;
    if (pred_total > 0) s.precision = static_cast<double>(overlap) / static_cast<double>(pred_total);
    if (ref_total > 0) s.recall = static_cast<double>(overlap) / static_cast<double>(ref_total);
    if (s.precision + s.recall > 0.0) {
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return s;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

}  // namespace

std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t up = row[j];
            std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            row[j] = std::min({up + 1, row[j - 1] + 1, diag + cost});
            diag = up;
        }
    }
    return row[b.size()];
}

double levenshtein_similarity(std::string_view a, std::string_view b) {
    std::u32string ca = utf8_codepoints(a);
    std::u32string cb = utf8_codepoints(b);
    std::size_t longest = std::max(ca.size(), cb.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein_distance(ca, cb)) / static_cast<double>(longest);
}

double lev_threshold_fraction(std::span<const double> scores, double p) {
    if (scores.empty()) throw EmptyCorpus();
    if (p < 0.0 || p > 1.0) throw InvalidArgument("threshold must lie in [0, 1]");
    std::size_t hits = 0;
    for (double s : scores) {
        if (p >= 1.0 ? s == 1.0 : s > p) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double bleu(const Tokens& pred, const std::vector<Tokens>& refs, int n, Smoothing smoothing) {
    if (n < 1) throw InvalidArgument("BLEU order must be >= 1");
    if (refs.empty()) throw InvalidArgument("BLEU needs at least one reference");
    if (pred.empty()) throw EmptyPrediction();

    double log_sum = 0.0;
    for (int order = 1; order <= n; ++order) {
        NgramCounts hyp = count_ngrams(pred, order);
        NgramCounts max_ref;
        for (const auto& ref : refs) {
            for (const auto& [gram, count] : count_ngrams(ref, order)) {
                auto& slot = max_ref[gram];
                slot = std::max(slot, count);
            }
        }
        std::size_t matches = clipped_overlap(hyp, max_ref);
        std::size_t total = ngram_total(pred, order);
        double precision;
        if (matches > 0) {
            precision = static_cast<double>(matches) / static_cast<double>(total);
        } else if (smoothing == Smoothing::kAddOne) {
            precision = 1.0 / static_cast<double>(total + 1);
        } else {
            return 0.0;
        }
        log_sum += std::log(precision);
    }
    double bp = brevity_penalty(static_cast<double>(pred.size()),
                                static_cast<double>(closest_ref_length(pred.size(), refs)));
    return 100.0 * bp * std::exp(log_sum / n);
}

double corpus_bleu(const std::vector<Tokens>& preds, const std::vector<Tokens>& refs, int n) {
    if (preds.size() != refs.size()) throw InvalidArgument("prediction/reference count differs");
    if (preds.empty()) throw EmptyCorpus();
    if (n < 1) throw InvalidArgument("BLEU order must be >= 1");

    std::vector<std::size_t> matches(static_cast<std::size_t>(n), 0);
    std::vector<std::size_t> totals(static_cast<std::size_t>(n), 0);
    double hyp_len = 0.0, ref_len = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        hyp_len += static_cast<double>(preds[i].size());
        ref_len += static_cast<double>(refs[i].size());
        for (int order = 1; order <= n; ++order) {
            auto k = static_cast<std::size_t>(order - 1);
            matches[k] += clipped_overlap(count_ngrams(preds[i], order), count_ngrams(refs[i], order));
            totals[k] += ngram_total(preds[i], order);
        }
    }
    double log_sum = 0.0;
    for (std::size_t k = 0; k < matches.size(); ++k) {
        if (matches[k] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(matches[k]) / static_cast<double>(totals[k]));
    }
    return 100.0 * brevity_penalty(hyp_len, ref_len) * std::exp(log_sum / n);
}

RougeVariant RougeVariant::from_string(std::string_view name) {
    if (name == "L" || name == "l") return longest_common_subsequence();
    int n = 0;
    for (char c : name) {
        if (c < '0' || c > '9') throw InvalidArgument("bad ROUGE variant '" + std::string(name) + "'");
        n = n * 10 + (c - '0');
    }
    if (n < 1) throw InvalidArgument("bad ROUGE variant '" + std::string(name) + "'");
    return ngram(n);
}

std::string RougeVariant::name() const { return lcs ? "L" : std::to_string(n); }

RougeScore rouge(const Tokens& pred, const Tokens& ref, RougeVariant variant) {
    if (variant.lcs) return from_counts(lcs_length(pred, ref), pred.size(), ref.size());
    if (variant.n < 1) throw InvalidArgument("ROUGE order must be >= 1");
    std::size_t overlap = clipped_overlap(count_ngrams(pred, variant.n), count_ngrams(ref, variant.n));
    return from_counts(overlap, ngram_total(pred, variant.n), ngram_total(ref, variant.n));
}

double distinct_n(const std::vector<Tokens>& corpus, int n) {
    if (n < 1) throw InvalidArgument("distinct-n order must be >= 1");
    std::unordered_set<std::string> unique;
    std::size_t total = 0;
    for (const auto& tokens : corpus) {
        std::size_t count = ngram_total(tokens, n);
        for (std::size_t i = 0; i < count; ++i) unique.insert(join_ngram(tokens, i, n));
        total += count;
    }
    if (total == 0) return 0.0;
    return static_cast<double>(unique.size()) / static_cast<double>(total);
}

bool exact_match(std::string_view pred, std::string_view gold, Dialect dialect) {
    return canonicalize_text(pred, dialect) == canonicalize_text(gold, dialect);
}

std::vector<std::string> match_tokens(const ActionSequence& seq, MatchMode mode) {
    std::vector<std::string> tokens;
    tokens.reserve(seq.actions.size());
    ActionSequence canon = canonicalize(seq);
    for (const auto& action : canon.actions) {
        if (mode == MatchMode::kOps) {
            tokens.push_back(action.type.name());
        } else {
            tokens.push_back(serialize_action(action, canon.dialect));
        }
    }
    return tokens;
}

double sequence_match(const ActionSequence& pred, const ActionSequence& gold, MatchMode mode) {
    std::vector<std::string> p = match_tokens(pred, mode);
    std::vector<std::string> g = match_tokens(gold, mode);
    return gestalt_ratio<std::string>(p, g);
}

PairScore score_pair(const std::string& id, std::string_view pred, std::string_view gold,
                     Dialect dialect) {
    PairScore score;
    score.id = id;

    auto try_parse = [dialect](std::string_view text) {
        try {
            return parse(text, dialect);
        } catch (const ParseError&) {
        } catch (const EmptyInput&) {
        }
        ActionSequence empty;
        empty.dialect = dialect;
        return empty;
    };
    ActionSequence pred_seq = try_parse(pred);
    ActionSequence gold_seq = try_parse(gold);

    std::string pred_canon = canonicalize_text(pred, dialect);
    std::string gold_canon = canonicalize_text(gold, dialect);
    score.levenshtein = levenshtein_similarity(pred_canon, gold_canon);
    score.exact_match = pred_canon == gold_canon;
    score.sm_o = sequence_match(pred_seq, gold_seq, MatchMode::kOps);
    score.sm_a = sequence_match(pred_seq, gold_seq, MatchMode::kOpsAndArgs);
    score.valid = check_validity(pred, dialect).is_valid;

    Tokens pt = tokenize(pred_canon);
    Tokens gt = tokenize(gold_canon);
    const std::vector<Tokens> refs{gt};
    for (int n = 1; n <= 4; ++n) score.bleu[n] = pt.empty() ? 0.0 : bleu(pt, refs, n);
    score.modified_bleu = pt.empty() ? 0.0 : bleu(pt, refs, 4, Smoothing::kAddOne);
    for (const char* v : {"1", "2", "4", "L"}) {
        score.rouge[v] = rouge(pt, gt, RougeVariant::from_string(v));
    }
    return score;
}

MetricReport score_corpus(std::span<const Prediction> preds, std::span<const CorpusRecord> golds,
                          Dialect dialect, const ScoreOptions& options) {
    std::map<std::string, const CorpusRecord*> gold_by_id;
    for (const auto& g : golds) {
        if (!gold_by_id.emplace(g.id, &g).second) {
            throw Error(ErrorKind::kData, "DuplicateId", "duplicate gold id " + g.id);
        }
    }
    std::map<std::string, const Prediction*> pred_by_id;
    for (const auto& p : preds) {
        if (!pred_by_id.emplace(p.id, &p).second) {
            throw Error(ErrorKind::kData, "DuplicateId", "duplicate prediction id " + p.id);
        }
    }

    std::vector<std::string> orphans;
    for (const auto& [id, p] : pred_by_id) {
        if (!gold_by_id.count(id)) orphans.push_back(id);
    }
    for (const auto& [id, g] : gold_by_id) {
        if (!pred_by_id.count(id)) orphans.push_back(id);
    }
    if (!orphans.empty()) {
        std::sort(orphans.begin(), orphans.end());
        throw IdMismatch(std::move(orphans));
    }
    if (pred_by_id.empty()) throw EmptyCorpus();

    struct Job {
        const Prediction* pred;
        const CorpusRecord* gold;
    };
    std::vector<Job> jobs;
    for (const auto& [id, p] : pred_by_id) jobs.push_back({p, gold_by_id.at(id)});

    MetricReport report;
    report.pairs.resize(jobs.size());
    std::size_t threads = options.threads ? options.threads : std::thread::hardware_concurrency();
    threads = std::clamp<std::size_t>(threads, 1, jobs.size());
    {
        std::vector<std::jthread> workers;
        for (std::size_t t = 0; t < threads; ++t) {
            workers.emplace_back([&, t] {
                for (std::size_t i = t; i < jobs.size(); i += threads) {
                    report.pairs[i] = score_pair(jobs[i].pred->id, jobs[i].pred->prediction,
                                                 jobs[i].gold->actions, dialect);
                }
            });
        }
    }

    std::map<std::string, std::vector<double>> columns;
    std::vector<Tokens> pred_tokens, gold_tokens;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const PairScore& s = report.pairs[i];
        columns["levenshtein"].push_back(s.levenshtein);
        for (const auto& [n, v] : s.bleu) columns["bleu_" + std::to_string(n)].push_back(v);
        columns["modified_bleu"].push_back(s.modified_bleu);
        for (const auto& [name, r] : s.rouge) {
            columns["rouge_" + name + "_precision"].push_back(r.precision);
            columns["rouge_" + name + "_recall"].push_back(r.recall);
            columns["rouge_" + name + "_f1"].push_back(r.f1);
        }
        columns["exact_match"].push_back(s.exact_match ? 1.0 : 0.0);
        columns["sm_o"].push_back(s.sm_o);
        columns["sm_a"].push_back(s.sm_a);
        columns["validity"].push_back(s.valid ? 1.0 : 0.0);

        auto parses = [dialect](std::string_view text) {
            try {
                parse(text, dialect);
                return true;
            } catch (const Error&) {
                return false;
            }
        };
        if (!parses(jobs[i].pred->prediction)) ++report.unparsed_predictions;
        if (!parses(jobs[i].gold->actions)) ++report.unparsed_golds;
        pred_tokens.push_back(tokenize(canonicalize_text(jobs[i].pred->prediction, dialect)));
        gold_tokens.push_back(tokenize(canonicalize_text(jobs[i].gold->actions, dialect)));
    }
    for (const auto& [name, values] : columns) report.aggregates[name] = mean(values);

    const auto& lev = columns["levenshtein"];
    for (double p : {0.5, 0.75, 0.9, 1.0}) report.lev_thresholds[p] = lev_threshold_fraction(lev, p);
    report.validity_rate = report.aggregates["validity"];
    for (int n = 1; n <= 4; ++n) report.distinct_n[n] = distinct_n(pred_tokens, n);
    for (int n : {2, 4}) report.corpus_bleu[n] = corpus_bleu(pred_tokens, gold_tokens, n);
    return report;
}

}  // namespace actionkit
