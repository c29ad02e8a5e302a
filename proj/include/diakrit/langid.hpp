#pragma once

// Language identification from diacritic evidence.
//
// A text chunk (or a set of detector hits) is reduced to an 85-bit presence
// vector over the diacritic classes; a small dense network maps that vector to
// a distribution over the 13 languages. A vector with no evidence at all is
// reported as indeterminate rather than guessed at.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diakrit/diacritic_table.hpp"
#include "diakrit/geometry.hpp"
#include "diakrit/layers.hpp"
#include "diakrit/model_io.hpp"
#include "diakrit/optim.hpp"
#include "diakrit/rng.hpp"
#include "diakrit/tensor.hpp"
#include "diakrit/utf8.hpp"

namespace diakrit {

// ---- presence vectors ---------------------------------------------------------------

struct PresenceVector {
    std::array<uint8_t, kNumDiacritics> bits{};

    bool any() const {
        for (uint8_t b : bits)
            if (b) return true;
        return false;
    }

    int count() const {
        int n = 0;
        for (uint8_t b : bits) n += b ? 1 : 0;
        return n;
    }

    void set(int cls) {
        if (cls < 0 || cls >= kNumDiacritics)
            throw Error("presence class " + std::to_string(cls) + " out of range");
        bits[static_cast<size_t>(cls)] = 1;
    }

    bool test(int cls) const { return bits[static_cast<size_t>(cls)] != 0; }

    friend PresenceVector operator|(const PresenceVector& a, const PresenceVector& b) {
        PresenceVector out;
        for (int i = 0; i < kNumDiacritics; ++i)
            out.bits[static_cast<size_t>(i)] = a.bits[static_cast<size_t>(i)] |
                                               b.bits[static_cast<size_t>(i)];
        return out;
    }

    friend bool operator==(const PresenceVector& a, const PresenceVector& b) {
        return a.bits == b.bits;
    }
};

// Bit i set iff the codepoint with canonical index i occurs at least once.
inline PresenceVector presence_from_text(const std::string& utf8) {
    PresenceVector out;
    const DiacriticTable& table = DiacriticTable::instance();
    for (char32_t cp : utf8_decode(utf8))
        if (auto idx = table.canonical_index(cp)) out.set(*idx);
    return out;
}

// Bit i set iff some detection of class i clears the confidence floor.
inline PresenceVector presence_from_detections(const std::vector<Detection>& dets,
                                               double min_confidence = 0.5) {
    PresenceVector out;
    for (const Detection& d : dets)
        if (d.conf >= min_confidence) out.set(d.cls);
    return out;
}

// ---- the classifier -----------------------------------------------------------------

struct LanguagePrediction {
    std::array<double, kNumLanguages> probs{};
    std::optional<Lang> language; // nullopt: no diacritic evidence, indeterminate
    double confidence = 0.0;

    bool indeterminate() const { return !language.has_value(); }
};

inline constexpr int kLangidHidden1 = 50;
inline constexpr int kLangidHidden2 = 30;

// 85 → dense(50)+ReLU → dense(30)+ReLU → dense(13), softmax applied by the
// loss during training and by predict() at inference.
class LangidNet {
    Rng rng_; // declared first: the layers below consume it during construction

public:
    Dense<float> fc1, fc2, fc3;
    Relu<float> r1, r2;

    explicit LangidNet(uint64_t seed)
        : rng_(seed), fc1(kNumDiacritics, kLangidHidden1, rng_),
          fc2(kLangidHidden1, kLangidHidden2, rng_), fc3(kLangidHidden2, kNumLanguages, rng_) {}

    Tensor<float> forward(const Tensor<float>& x, bool train) {
        Tensor<float> h = r1.forward(fc1.forward(x, train), train);
        h = r2.forward(fc2.forward(h, train), train);
        return fc3.forward(h, train);
    }

    void backward(const Tensor<float>& dlogits) {
        Tensor<float> d = fc3.backward(dlogits);
        d = fc2.backward(r2.backward(d));
        fc1.backward(r1.backward(d));
    }

    std::vector<Param<float>> params() {
        std::vector<Param<float>> out;
        for (auto& p : fc1.params("fc1")) out.push_back(p);
        for (auto& p : fc2.params("fc2")) out.push_back(p);
        for (auto& p : fc3.params("fc3")) out.push_back(p);
        return out;
    }

    size_t param_count() {
        size_t n = 0;
        for (auto& p : params()) n += p.value->numel();
        return n;
    }
};

inline Tensor<float> to_input_row(const PresenceVector& v) {
    Tensor<float> x({1, kNumDiacritics});
    for (int i = 0; i < kNumDiacritics; ++i)
        x.at(0, i) = v.bits[static_cast<size_t>(i)] ? 1.0f : 0.0f;
    return x;
}

inline LanguagePrediction predict(LangidNet& net, const PresenceVector& v) {
    LanguagePrediction out;
    if (!v.any()) {
        // no evidence: honest uniform distribution, flagged indeterminate
        out.probs.fill(1.0 / kNumLanguages);
        out.confidence = 1.0 / kNumLanguages;
        return out;
    }
    Tensor<float> p = softmax(net.forward(to_input_row(v), false));
    int best = 0;
    for (int c = 0; c < kNumLanguages; ++c) {
        out.probs[static_cast<size_t>(c)] = p.at(0, c);
        if (p.at(0, c) > p.at(0, best)) best = c;
    }
    out.language = static_cast<Lang>(best);
    out.confidence = out.probs[static_cast<size_t>(best)];
    return out;
}

// ---- training data ---------------------------------------------------------------------

struct LabeledVector {
    PresenceVector vec;
    Lang lang = Lang::Spanish;
};

struct VectorDataset {
    std::vector<LabeledVector> train;
    std::vector<LabeledVector> val;
};

namespace langid_detail {

inline std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (ch == ' ' || ch == '\n' || ch == '\t' || ch == '\r' || ch == '\f' || ch == '\v') {
            if (!cur.empty()) words.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

} // namespace langid_detail

inline constexpr int kChunkMinWords = 3;
inline constexpr int kChunkMaxWords = 40;

// For each language draw `samples_per_language` random text chunks of 3–40
// words, keep only chunks carrying at least one diacritic, and map each to a
// presence vector. The last 10% of every language's samples form the
// validation split. Deterministic in `seed`.
inline VectorDataset gen_training_vectors(const std::map<Lang, std::string>& text_by_lang,
                                          int samples_per_language, uint64_t seed) {
    if (samples_per_language <= 0) throw Error("samples_per_language must be positive");
    VectorDataset ds;
    Rng rng(seed);
    const int val_n = samples_per_language / 10;
    const int train_n = samples_per_language - val_n;
    for (const auto& [lang, text] : text_by_lang) {
        std::vector<std::string> words = langid_detail::split_words(text);
        if (static_cast<int>(words.size()) < kChunkMinWords)
            throw DataError(std::string("insufficient qualifying chunks for ") +
                            std::string(lang_name(lang)) + ": corpus has fewer than 3 words");
        const int max_len = std::min<int>(kChunkMaxWords, static_cast<int>(words.size()));
        std::vector<PresenceVector> vecs;
        vecs.reserve(static_cast<size_t>(samples_per_language));
        const int kMaxTries = 1000;
        while (static_cast<int>(vecs.size()) < samples_per_language) {
            bool found = false;
            for (int attempt = 0; attempt < kMaxTries && !found; ++attempt) {
                int len = rng.range(kChunkMinWords, max_len);
                int start = rng.range(0, static_cast<int>(words.size()) - len);
                PresenceVector v;
                for (int w = start; w < start + len; ++w)
                    v = v | presence_from_text(words[static_cast<size_t>(w)]);
                if (v.any()) {
                    vecs.push_back(v);
                    found = true;
                }
            }
            if (!found)
                throw DataError(std::string("insufficient qualifying chunks for ") +
                                std::string(lang_name(lang)) +
                                ": no diacritic-bearing chunk found in " +
                                std::to_string(kMaxTries) + " draws");
        }
        for (int i = 0; i < train_n; ++i)
            ds.train.push_back({vecs[static_cast<size_t>(i)], lang});
        for (int i = train_n; i < samples_per_language; ++i)
            ds.val.push_back({vecs[static_cast<size_t>(i)], lang});
    }
    return ds;
}

// ---- training ----------------------------------------------------------------------------

struct LangidTrainLog {
    std::vector<double> train_loss;   // mean cross-entropy per epoch
    std::vector<double> val_accuracy; // fraction of validation vectors argmax-correct
};

inline constexpr int kLangidBatch = 32;

inline double langid_val_accuracy(LangidNet& net, const std::vector<LabeledVector>& val) {
    if (val.empty()) return 0.0;
    size_t correct = 0;
    for (const LabeledVector& lv : val) {
        LanguagePrediction p = predict(net, lv.vec);
        if (p.language && *p.language == lv.lang) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(val.size());
}

// Adam (step size 0.001, standard moment decays), 20 epochs by default,
// mini-batches of 32 reshuffled per epoch. Divergence aborts with an error.
inline LangidTrainLog train_langid(LangidNet& net, const VectorDataset& data, int epochs,
                                   uint64_t seed) {
    if (data.train.empty()) throw Error("cannot train language identifier on an empty dataset");
    if (epochs <= 0) throw Error("epochs must be positive");
    LangidTrainLog log;
    Rng rng(seed);
    Adam<float> adam;
    SoftmaxXent<float> xent;
    auto params = net.params();
    std::vector<size_t> order(data.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t step = 0;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        double loss_sum = 0;
        size_t batches = 0;
        for (size_t at = 0; at < order.size(); at += kLangidBatch) {
            const size_t n = std::min<size_t>(kLangidBatch, order.size() - at);
            Tensor<float> x({static_cast<int>(n), kNumDiacritics});
            std::vector<int> targets(n);
            for (size_t r = 0; r < n; ++r) {
                const LabeledVector& lv = data.train[order[at + r]];
                for (int i = 0; i < kNumDiacritics; ++i)
                    x.at(static_cast<int>(r), i) = lv.vec.bits[static_cast<size_t>(i)] ? 1.0f
                                                                                       : 0.0f;
                targets[r] = static_cast<int>(lv.lang);
            }
            Tensor<float> logits = net.forward(x, true);
            float loss = xent.forward(logits, targets);
            if (!std::isfinite(loss))
                throw Error("language-identifier training diverged at epoch " +
                            std::to_string(e));
            net.backward(xent.backward());
            adam.step(params, step++);
            loss_sum += loss;
            ++batches;
        }
        log.train_loss.push_back(loss_sum / static_cast<double>(batches));
        log.val_accuracy.push_back(langid_val_accuracy(net, data.val));
    }
    return log;
}

// ---- serialization -------------------------------------------------------------------------

inline size_t save_langid(LangidNet& net, const std::string& path) {
    return save_model(R"({"kind":"langid","layers":[85,50,30,13]})", net.params(), path);
}

inline LangidNet load_langid(const std::string& path) {
    LangidNet net(0);
    ModelFile mf = load_model(path);
    auto params = net.params();
    load_into(mf, params);
    return net;
}

} // namespace diakrit
