#include "sqbc/fixtures.hpp"

#include <fstream>

#include <json.hpp>

#include "sqbc/error.hpp"
#include "sqbc/random.hpp"

namespace sqbc::fixtures {

namespace {

constexpr std::uint64_t kFixtureSeed = 20240611;

std::vector<float> draw(Rng& rng, Stance stance, const GaussianSpec& spec) {
  std::vector<float> v(spec.dim);
  const double sign = stance == Stance::kFavor ? 1.0 : -1.0;
  for (std::size_t j = 0; j < spec.dim; ++j) {
    double mean = 0.0;
    if (j == 0) mean = sign * spec.separation / 2.0;
    if (j == 1) mean = spec.offset;
    v[j] = static_cast<float>(mean + spec.noise * rng.normal());
  }
  return v;
}

}  // namespace

const std::array<BenchmarkQuestion, 5>& benchmark_questions() {
  static const std::array<BenchmarkQuestion, 5> questions = {{
      {"q1",
       "Sollen sich die Versicherten stärker an den Gesundheitskosten beteiligen (z.B. "
       "Erhöhung der Mindestfranchise)",
       "Should insured persons contribute more to health costs (e.g. increase in the minimum "
       "deductible)?",
       146, 154, 87, 113, 18},
      {"q2", "Befürworten Sie ein generelles Werbeverbot für Alkohol und Tabak?",
       "Do you support a general ban on advertising alcohol and tobacco?", 19, 44, 10, 33, 1},
      {"q3",
       "Soll eine Impfpflicht für Kinder gemäss dem schweizerischen Impfplan eingeführt werden?",
       "Should compulsory vaccination of children be introduced in accordance with the Swiss "
       "vaccination schedule?",
       34, 83, 21, 58, 6},
      {"q4",
       "Soll die Aufenthaltserlaubnis für Migrant/innen aus Nicht-EU/EFTA-Staaten schweizweit "
       "an die Erfüllung verbindlicher Integrationsvereinbarungen geknüpft werden?",
       "Should the residence permit for migrants from non-EU/EFTA countries be linked to the "
       "fulfilment of binding integration agreements throughout Switzerland?",
       68, 40, 34, 39, 114},
      {"q5", "Soll der Bund erneuerbare Energien stärker fördern?",
       "Should the federal government promote renewable energy more?", 111, 50, 70, 38, 21},
  }};
  return questions;
}

QuestionInput gaussian_question(const std::string& question_id, const std::string& question_text,
                                std::size_t favor, std::size_t against, std::size_t m_synth,
                                const GaussianSpec& spec, std::uint64_t seed) {
  if (m_synth < 2 || m_synth % 2 != 0)
    throw Error(ErrorCode::kInvalidArgument, "synthetic set size must be even and >= 2");
  Rng rng(seed);

  std::vector<Stance> labels(favor, Stance::kFavor);
  labels.insert(labels.end(), against, Stance::kAgainst);
  rng.shuffle(std::span<Stance>(labels));

  QuestionInput out;
  out.dataset = QuestionDataset{question_id, question_text, {}};
  std::vector<std::vector<float>> rows;
  std::vector<std::string> ids;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    Example e;
    e.id = question_id + "-" + std::to_string(n + 1);
    e.question_id = question_id;
    e.question_text = question_text;
    e.comment_text = "Kommentar " + std::to_string(n + 1) + " zu " + question_id;
    e.label = labels[n];
    ids.push_back(e.id);
    rows.push_back(draw(rng, labels[n], spec));
    out.dataset.examples.push_back(std::move(e));
  }
  out.embeddings = EmbeddingMatrix::from_rows(std::move(ids), rows);

  QuestionDataset synth{question_id, question_text, {}};
  std::vector<std::vector<float>> synth_rows;
  std::vector<std::string> synth_ids;
  for (std::size_t m = 0; m < m_synth; ++m) {
    const auto stance = m < m_synth / 2 ? Stance::kFavor : Stance::kAgainst;
    Example e;
    e.id = question_id + "-synth-" + std::to_string(m + 1);
    e.question_id = question_id;
    e.question_text = question_text;
    e.comment_text = std::string(stance == Stance::kFavor ? "Dafür" : "Dagegen") + ", Beitrag " +
                     std::to_string(m + 1);
    e.label = stance;
    e.origin = Origin::kSynthetic;
    synth_ids.push_back(e.id);
    synth_rows.push_back(draw(rng, stance, spec));
    synth.examples.push_back(std::move(e));
  }
  out.synth = SynthDataset(std::move(synth));
  out.synth_embeddings = EmbeddingMatrix::from_rows(std::move(synth_ids), synth_rows);
  return out;
}

QuestionInput benchmark_question(std::size_t index, std::size_t m_synth,
                                 const GaussianSpec& spec) {
  const auto& q = benchmark_questions().at(index);
  return gaussian_question(q.question_id, q.german, q.favor(), q.against(), m_synth, spec,
                           derive_seed(kFixtureSeed, index));
}

void write_xstance_fixture(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const auto record = [](const Example& e, const std::string& language) {
    return nlohmann::json{{"id", e.id},
                          {"question_id", e.question_id},
                          {"question", e.question_text},
                          {"comment", e.comment_text},
                          {"label", *e.label == Stance::kFavor ? "FAVOR" : "AGAINST"},
                          {"language", language},
                          {"topic", "Healthcare"}};
  };
  for (std::size_t i = 0; i < benchmark_questions().size(); ++i) {
    const auto input = benchmark_question(i, 2);
    std::size_t n = 0;
    for (const auto& e : input.dataset.examples) {
      out << record(e, "de").dump() << '\n';
      if (++n % 50 == 0) {
        auto french = e;
        french.id += "-fr";
        french.comment_text = "Commentaire " + std::to_string(n);
        out << record(french, "fr").dump() << '\n';
      }
    }
  }
  for (std::size_t n = 0; n < 12; ++n) {
    Example e;
    e.id = "q9-" + std::to_string(n + 1);
    e.question_id = "q9";
    e.question_text = "Soll die Schweiz das Stimmrechtsalter auf 16 senken?";
    e.comment_text = "Anderer Kommentar " + std::to_string(n + 1);
    e.label = n % 2 == 0 ? Stance::kFavor : Stance::kAgainst;
    out << record(e, "de").dump() << '\n';
  }
}

void write_demo_workspace(const std::filesystem::path& dir, std::size_t m_synth) {
  std::filesystem::create_directories(dir);
  std::ofstream toml(dir / "sweep.toml", std::ios::trunc);
  if (!toml) throw Error(ErrorCode::kIo, "cannot write " + (dir / "sweep.toml").string());
  toml << "# Generated demo sweep over the five fixture questions.\n"
          "kappas = [0, 1, 2, 5, 10, 20, 30]\n"
          "seeds = [0]\n"
          "split_ratio = 0.6\n\n"
          "[train]\n"
          "learning_rate = 0.1\n"
          "epochs = 500\n"
          "l2 = 1e-4\n";
  for (std::size_t i = 0; i < benchmark_questions().size(); ++i) {
    const auto input = benchmark_question(i, m_synth);
    const auto stem = benchmark_questions()[i].question_id;
    save_question(input.dataset, dir / (stem + ".jsonl"));
    save_matrix(input.embeddings, dir / (stem + ".emb"));
    save_synthetic(input.synth, dir / (stem + ".synth.jsonl"));
    save_matrix(input.synth_embeddings, dir / (stem + ".synth.emb"));
    toml << "\n[[questions]]\n"
         << "data = \"" << stem << ".jsonl\"\n"
         << "embeddings = \"" << stem << ".emb\"\n"
         << "synth = \"" << stem << ".synth.jsonl\"\n"
         << "synth_embeddings = \"" << stem << ".synth.emb\"\n";
  }
}

}  // namespace sqbc::fixtures
