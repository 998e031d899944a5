#include <array>
#include <regex>
#include <string>
#include <vector>

#include "medsynth/corpus.hpp"
#include "medsynth/llm_gateway.hpp"
#include "medsynth/rng.hpp"
#include "medsynth/text.hpp"

namespace medsynth::llm {

namespace {

constexpr std::array kNerSubjects = {
    "Patients with {E}",
    "The prevalence of {E}",
    "Early diagnosis of {E}",
    "Genetic susceptibility to {E}",
    "Treatment response in {E}",
    "The pathogenesis of {E}",
    "Serum biomarkers of {E}",
    "Clinical management of {E}",
    "Familial clustering of {E}",
    "Long-term outcome of {E}",
    "Mortality attributable to {E}",
    "Histological features of {E}",
};

constexpr std::array kNerVerbs = {
    "was evaluated in",
    "has been linked to comorbidities in",
    "remains poorly characterized in",
    "was significantly associated with disease burden in",
    "was assessed prospectively in",
    "showed marked heterogeneity across",
    "was investigated in",
    "differed substantially between subgroups of",
    "was reported more frequently in",
    "was quantified in",
};

constexpr std::array kNerObjects = {
    "a prospective cohort of {N} adults",
    "a retrospective review of {N} hospital records",
    "a multicenter randomized trial enrolling {N} participants",
    "two independent case-control studies with {N} cases",
    "a population-based registry covering {N} families",
    "a murine model treated for {N} days",
    "{N} patients receiving adjuvant therapy",
    "a cross-sectional survey of {N} primary care clinics",
    "a meta-analysis of {N} published studies",
    "a longitudinal birth cohort followed for {N} months",
};

constexpr std::array kNerClosers = {
    ".",
    ", suggesting a shared molecular mechanism.",
    ", although the effect size was modest.",
    " (p < 0.01).",
    ", independent of age and sex.",
    ", consistent with previous reports.",
    ", which warrants further investigation.",
};

constexpr std::array kRePositive = {
    "Polymorphisms in @GENE$ were significantly associated with an increased risk of @DISEASE$ in {C} (OR = {R}).",
    "Our data indicate that @GENE$ expression is elevated in @DISEASE$ tissue from {C}, with a {P}-fold increase.",
    "The study demonstrates that the @GENE$ gene is directly linked to @DISEASE$ development in {C}.",
    "Carriers of the @GENE$ risk allele showed a {P}-fold higher incidence of @DISEASE$ among {C}.",
    "Functional variants of @GENE$ contribute to susceptibility to @DISEASE$, as confirmed in {C} (p = 0.0{P}).",
    "Loss of @GENE$ function accelerated the progression of @DISEASE$ in {C}.",
    "A missense mutation in @GENE$ co-segregated with @DISEASE$ in {C} (LOD score {R}).",
    "Increased methylation of @GENE$ was observed in @DISEASE$ samples obtained from {C} (OR = {R}).",
};

constexpr std::array kReNegative = {
    "No significant association was found between @GENE$ and @DISEASE$ in {C} (OR = {R}).",
    "The @GENE$ genotype distribution did not differ between @DISEASE$ cases and controls in {C}.",
    "Our results showed that @GENE$ polymorphism was not associated with susceptibility to @DISEASE$ among {C}.",
    "Variants of @GENE$ are not associated with @DISEASE$ after adjustment for {P} covariates in {C}.",
    "Expression of @GENE$ was unchanged in @DISEASE$ biopsies from {C} (p = 0.{P}).",
    "We found no evidence that @GENE$ haplotypes modify the risk of @DISEASE$ in {C}.",
    "Although @GENE$ was sequenced in {C}, no variant segregated with @DISEASE$ (LOD score {R}).",
    "@GENE$ copy number showed no correlation with @DISEASE$ severity across {C}.",
};

constexpr std::array kReCohorts = {
    "a Han Chinese population",
    "{N} European families",
    "a Japanese case-control cohort",
    "{N} postmenopausal women",
    "a pediatric cohort of {N} children",
    "African American participants",
    "{N} consecutive hospital patients",
    "a Scandinavian registry",
    "{N} twin pairs",
    "an Iranian case-control study",
    "{N} elderly volunteers",
    "a Brazilian multicenter sample",
};

constexpr std::array kDiseaseCues = {
    "itis", "oma", "emia", "pathy", "osis", "cancer", "disease", "syndrome", "disorder", "diabetes", "tumor",
    "tumour", "carcinoma", "leukemia", "polyposis", "arthritis", "infection", "failure", "deficiency",
};

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string fill_numbers(std::string s, SplitMix64& rng) {
  s = replace_all(std::move(s), "{N}", std::to_string(20 + rng.bounded(980)));
  s = replace_all(std::move(s), "{P}", std::to_string(2 + rng.bounded(8)));
  const uint64_t r = 105 + rng.bounded(300);
  s = replace_all(std::move(s), "{R}", std::to_string(r / 100) + "." + std::to_string(r % 100 / 10) + std::to_string(r % 10));
  return s;
}

template <size_t K>
const char* pick(const std::array<const char*, K>& bank, SplitMix64& rng) {
  return bank[rng.bounded(K)];
}

uint64_t request_seed(const ChatRequest& request, uint64_t seed) {
  return text::fnv1a64(canonical_request(request)) ^ (seed * 0x9E3779B97F4A7C15ULL);
}

std::string ner_sentence(const std::string& entity, SplitMix64& rng) {
  std::string s = std::string(pick(kNerSubjects, rng)) + " " + pick(kNerVerbs, rng) + " " + pick(kNerObjects, rng) +
                  pick(kNerClosers, rng);
  return fill_numbers(replace_all(std::move(s), "{E}", entity), rng);
}

std::string re_sentence(bool positive, SplitMix64& rng) {
  std::string s = positive ? pick(kRePositive, rng) : pick(kReNegative, rng);
  s = replace_all(std::move(s), "{C}", pick(kReCohorts, rng));
  return fill_numbers(std::move(s), rng);
}

bool corrupt(SplitMix64& rng, double rate) {
  if (rate <= 0.0) return false;
  if (rate >= 1.0) return true;
  return rng.uniform() < rate;
}

std::string reply_ner_generation(int n, const std::string& entity, SplitMix64& rng, double corruption) {
  std::string out;
  for (int i = 1; i <= n; ++i) {
    const bool broken = corrupt(rng, corruption);
    std::string sentence = ner_sentence(broken ? "an unrelated condition" : entity, rng);
    out += std::to_string(i) + ". " + sentence + "\n";
  }
  return out;
}

std::string reply_re_generation(int positives, int negatives, SplitMix64& rng, double corruption) {
  std::string out;
  auto row = [&](bool positive) {
    const std::string sentence = re_sentence(positive, rng);
    if (corrupt(rng, corruption)) {
      out += "| " + sentence + " |\n";
    } else {
      out += "| " + sentence + " | " + (positive ? "Yes" : "No") + " |\n";
    }
  };
  for (int i = 0; i < positives; ++i) row(true);
  for (int i = 0; i < negatives; ++i) row(false);
  return out;
}

bool looks_like_disease(const std::string& lower) {
  for (const char* cue : kDiseaseCues) {
    const std::string_view c(cue);
    if (lower.size() >= c.size() && lower.compare(lower.size() - c.size(), c.size(), c) == 0) return true;
  }
  return false;
}

std::string reply_ner_task(const std::string& sentence, const std::string& type, SplitMix64& rng, double corruption) {
  const auto tokens = corpus::tokenize(sentence);
  std::vector<corpus::Tag> tags(tokens.size());
  // Tag a disease cue word plus up to two preceding non-function words.
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!looks_like_disease(text::lowercase(tokens[i].text))) continue;
    size_t start = i;
    while (start > 0 && i - start < 2 && tokens[start - 1].text.size() > 3 &&
           !text::is_punctuation(text::decode(tokens[start - 1].text).front()) && tags[start - 1].kind == corpus::TagKind::O) {
      --start;
    }
    tags[start] = corpus::Tag::begin(type);
    for (size_t k = start + 1; k <= i; ++k) tags[k] = corpus::Tag::inside(type);
  }
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (corrupt(rng, corruption)) {
      out += tokens[i].text + "\n";
    } else {
      out += tokens[i].text + "\t" + corpus::to_string(tags[i]) + "\n";
    }
  }
  return out;
}

std::string reply_re_task(const std::string& sentence, SplitMix64& rng, double corruption) {
  if (corrupt(rng, corruption)) return "It depends on the context of the study.";
  const std::string lower = text::lowercase(sentence);
  for (const char* cue : {"no significant", "not associated", "did not", "no evidence", "no correlation", "unchanged",
                          "no variant", "not support"}) {
    if (lower.find(cue) != std::string::npos) return "No";
  }
  return "Yes";
}

struct TemplateSet {
  std::vector<std::string> bodies;
};

TemplateSet candidates_for(const std::string& placeholders) {
  if (placeholders.find("[Seed Entities]") != std::string::npos) {
    return {{
        "Please act as a sentence generator for the biological domain and provide N sentences containing the words "
        "[Seed Entities]. These sentences should not include any additional information or explanation.",
        "Write N sentences containing the words [Seed Entities]. Mimic the style of PubMed journal articles and "
        "output one numbered sentence per line.",
        "As a biomedical writer, compose N sentences containing the words [Seed Entities]. Use varied sentence "
        "structures and no explanations.",
        "Generate N sentences containing the words [Seed Entities]. Each sentence should read like an abstract "
        "from a clinical journal.",
        "Provide N sentences containing the words [Seed Entities]. Keep each sentence self-contained and factual in "
        "tone.",
    }};
  }
  if (placeholders.find("[Seed Examples]") != std::string::npos) {
    return {{
        "Generate 3 positive and 3 negative examples for the gene-disease relation extraction task, using "
        "\"@GENE$\" and \"@DISEASE$\" as markers, formatted as | sentence | label |. [Seed Examples]",
        "Generate 3 positive and 3 negative examples in the style of PubMed abstracts where @GENE$ and @DISEASE$ "
        "mark the entities; label Yes or No. [Seed Examples]",
        "Generate 3 positive and 3 negative examples of gene-disease associations, one | sentence | label | row "
        "each, following these seeds: [Seed Examples]",
        "Generate 3 positive and 3 negative examples for relation classification between @GENE$ and @DISEASE$. "
        "[Seed Examples]",
        "Generate 3 positive and 3 negative examples that vary sentence structure; answer with | sentence | label "
        "| rows. [Seed Examples]",
    }};
  }
  if (placeholders.find("@TEXT") != std::string::npos) {
    return {{
        "Please do NER task for \"@TEXT\" (output IOB format, use tab key to separate the word and label, the "
        "entity is disease name)",
        "Tag every word of \"@TEXT\" with IOB labels for disease names, one word and label per line separated by a "
        "tab.",
        "Identify disease mentions in \"@TEXT\" and output each word with its IOB tag, tab separated.",
        "Perform biomedical named entity recognition on \"@TEXT\"; output word<TAB>IOB tag lines only.",
        "Label the sentence \"@TEXT\" token by token in IOB format for disease entities without explanation.",
    }};
  }
  return {{
      "Given a sentence with a gene \"@GENE$\" and a disease \"@DISEASE$\", predict whether the gene and disease "
      "have a relation. Answer Yes or No.",
      "Decide whether the sentence states a relation between @GENE$ and @DISEASE$; reply Yes or No only.",
      "Does the following sentence describe a functional, causal, or associative link between @GENE$ and "
      "@DISEASE$? Answer Yes or No.",
      "Classify the gene-disease pair (@GENE$, @DISEASE$) in the sentence as related (Yes) or unrelated (No).",
      "Read the sentence and predict whether the gene and disease have a relation; output Yes or No.",
  }};
}

constexpr std::array kAugmentations = {
    " Vary sentence length.",
    " Use a formal academic register.",
    " Avoid repeating sentence openings.",
    " Prefer sentences that report study results.",
    " Include quantitative findings where natural.",
};

std::string numbered(const std::vector<std::string>& items) {
  std::string out = "Here are five prompts you can use:\n\n";
  for (size_t i = 0; i < items.size(); ++i) out += std::to_string(i + 1) + ". " + items[i] + "\n";
  return out;
}

}  // namespace

ChatResponse mock_complete(const ChatRequest& request, uint64_t seed, double corruption_rate) {
  SplitMix64 rng(request_seed(request, seed));
  const std::string& prompt = request.prompt();
  ChatResponse response;
  response.provider = Provider::Mock;

  static const std::regex ner_gen(R"xx((\d+) sentences containing the words? "?([^"\n]+?)"?(\.\s|\.$|:|\n|$))xx");
  static const std::regex re_gen(R"(Generate (\d+) positive and (\d+) negative examples)");
  static const std::regex ner_task(R"xx(Please do NER task for "([\s\S]*)" \(output IOB format)xx");
  static const std::regex entity_kind(R"(the entity is (\w+) name)");
  static const std::regex placeholders(R"(Use the placeholders ([^\n]*?) verbatim)");
  static const std::regex augment(R"(Previous best prompt: ([^\n]+))");

  std::smatch m;
  if (prompt.find("Provide five concise prompts or templates") != std::string::npos) {
    std::string names;
    if (std::regex_search(prompt, m, placeholders)) names = m[1].str();
    response.content = numbered(candidates_for(names).bodies);
  } else if (prompt.find("Augment five prompts based on the previous best prompt") != std::string::npos &&
             std::regex_search(prompt, m, augment)) {
    const std::string best = text::trim(m[1].str());
    std::vector<std::string> items;
    for (const char* extra : kAugmentations) items.push_back(best + extra);
    response.content = numbered(items);
  } else if (std::regex_search(prompt, m, re_gen)) {
    response.content = reply_re_generation(std::stoi(m[1].str()), std::stoi(m[2].str()), rng, corruption_rate);
  } else if (std::regex_search(prompt, m, ner_gen)) {
    response.content = reply_ner_generation(std::stoi(m[1].str()), text::trim(m[2].str()), rng, corruption_rate);
  } else if (std::regex_search(prompt, m, ner_task)) {
    std::smatch kind;
    std::string type = "Disease";
    if (std::regex_search(prompt, kind, entity_kind)) {
      type = kind[1].str();
      if (!type.empty()) type[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(type[0])));
    }
    response.content = reply_ner_task(m[1].str(), type, rng, corruption_rate);
  } else if (prompt.find("predict whether the gene and disease have a relation") != std::string::npos) {
    const auto lines = text::split_lines(prompt);
    response.content = reply_re_task(lines.empty() ? prompt : lines.back(), rng, corruption_rate);
  } else {
    response.content = "I am a deterministic mock and did not recognize this prompt.";
  }
  return response;
}

}  // namespace medsynth::llm
