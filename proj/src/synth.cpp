#include "prosched/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>

#include <json.hpp>

#include "prosched/records.hpp"

namespace prosched {

using nlohmann::json;

ActionCatalog synthetic_catalog() {
  auto spec = [](std::string name, std::string desc, std::vector<std::string> req, std::vector<std::string> opt,
                 Backend b) {
    ActionSpec s;
    s.name = std::move(name);
    s.description = std::move(desc);
    s.required_params = std::move(req);
    s.optional_params = std::move(opt);
    s.backend = b;
    for (const auto& p : s.required_params) s.param_docs[p] = {"string", ""};
    for (const auto& p : s.optional_params) s.param_docs[p] = {"string", ""};
    return s;
  };
  ActionCatalog c;
  c.name = "mortgage-servicing";
  c.version = "1.0";
  c.domain = "home_loan";
  c.actions = {
      spec("calculate_payment", "Estimate the monthly payment for a loan scenario",
           {"loan_amount", "interest_rate", "term_years"}, {}, Backend::kApiDefinition),
      spec("check_credit_score", "Pull the applicant's credit report", {"applicant_id"}, {"bureau"},
           Backend::kMcpTool),
      spec("lock_rate", "Lock the quoted interest rate", {"loan_id", "rate"}, {"lock_days"},
           Backend::kApiDefinition),
      spec("request_documents", "Ask the client to upload supporting documents", {"document_type"}, {"due_date"},
           Backend::kCustomAgent),
      spec("schedule_appraisal", "Book a property appraisal", {"property_address", "preferred_date"},
           {"contact_phone"}, Backend::kMcpTool),
      spec("verify_identity", "Confirm the caller's identity", {"full_name", "date_of_birth"}, {"ssn_last4"},
           Backend::kMcpTool),
  };
  c.workflows = {
      {"application", {"verify_identity", "check_credit_score", "calculate_payment", "lock_rate"}},
      {"closing", {"schedule_appraisal", "request_documents"}},
  };
  return c;
}

namespace {

using Rng = std::mt19937_64;

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

std::string param_value(const std::string& param, Rng& rng) {
  char buf[64];
  if (param == "loan_amount") std::snprintf(buf, sizeof buf, "%d000", uniform(rng, 150, 900));
  else if (param == "interest_rate") std::snprintf(buf, sizeof buf, "%d.%d", uniform(rng, 5, 7), uniform(rng, 0, 9));
  else if (param == "term_years") std::snprintf(buf, sizeof buf, "%d", uniform(rng, 0, 1) ? 30 : 15);
  else if (param == "preferred_date") std::snprintf(buf, sizeof buf, "2025-%02d-%02d", uniform(rng, 1, 12), uniform(rng, 1, 28));
  else if (param == "rate") std::snprintf(buf, sizeof buf, "%d.%d%d", uniform(rng, 5, 7), uniform(rng, 0, 9), uniform(rng, 0, 9));
  else std::snprintf(buf, sizeof buf, "%s-%d", param.c_str(), uniform(rng, 1000, 9999));
  return buf;
}

const char* kClientLines[] = {
    "I'm calling about the loan on the house at %d Maple Street.",
    "We were hoping to borrow around $%d,000 if that works.",
    "Could you tell me what a payment would look like over %d years?",
    "My wife and I moved here %d years ago and want to refinance.",
    "I can send the pay stubs by the %dth if you need them.",
    "The appraiser can come any weekday after the %dth.",
    "My date of birth? Sure, it's in my file under account %d.",
    "Is the rate you quoted good for %d days?",
    "I checked my credit last month, it was around %d.",
    "Let me grab the paperwork, give me %d seconds.",
};

const char* kAdvisorLines[] = {
    "Thanks, I have your file open, reference %d.",
    "I can run the numbers for you, it takes about %d minutes.",
    "We will need two forms of ID before step %d.",
    "Rates moved a little this week, about %d basis points.",
    "I'll note that the property is roughly %d square feet.",
    "Our appraisal partners have openings in %d days.",
    "I can hold that rate while we collect %d more documents.",
    "Let me confirm a few details, this is question %d of five.",
    "Your application is at stage %d of the process.",
    "I'll send a secure upload link within %d minutes.",
};

std::string line_for(bool client, Rng& rng) {
  const auto& pool = client ? kClientLines : kAdvisorLines;
  const int i = uniform(rng, 0, 9);
  char buf[200];
  std::snprintf(buf, sizeof buf, pool[i], uniform(rng, 2, 9999));
  return buf;
}

ActionInstance make_instance(const ActionSpec& spec, const std::map<std::string, std::string>& values,
                             TriggerStatus status, int provided_required) {
  ActionInstance a;
  a.spec_name = spec.name;
  a.description = spec.description;
  for (std::size_t i = 0; i < spec.required_params.size(); ++i) {
    const auto& p = spec.required_params[i];
    const bool provided = static_cast<int>(i) < provided_required;
    a.inputs_required.push_back({p, ParamKind::kRequired, provided,
                                 provided ? std::optional<std::string>(values.at(p)) : std::nullopt});
  }
  for (const auto& p : spec.optional_params) a.inputs_optional.push_back({p, ParamKind::kOptional, false, std::nullopt});
  const bool complete = provided_required >= static_cast<int>(spec.required_params.size());
  a.readiness_maturity = complete ? Level::kHigh : (provided_required > 0 ? Level::kMedium : Level::kLow);
  a.trigger_confidence = status == TriggerStatus::kPending ? Level::kMedium : Level::kHigh;
  a.status = status;
  return a;
}

}  // namespace

std::vector<Dialogue> synth_dialogues(const SynthOptions& opt) {
  const ActionCatalog cat = synthetic_catalog();
  Rng rng(opt.seed);
  // Ready window lead over the trigger turn.
  std::discrete_distribution<int> gap_dist({15, 20, 25, 18, 10, 7, 5});
  std::vector<Dialogue> out;
  for (int di = 0; di < opt.dialogues; ++di) {
    Dialogue d;
    char id[32];
    std::snprintf(id, sizeof id, "dlg-%04d", di + 1);
    d.id = id;
    const int n = uniform(rng, opt.min_turns, opt.max_turns);
    for (int t = 1; t <= n; ++t) {
      TurnAnnotation ta;
      ta.turn = {t, t % 2 == 1 ? "client" : "advisor", line_for(t % 2 == 1, rng)};
      d.turns.push_back(std::move(ta));
    }

    std::vector<std::size_t> order(cat.actions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const int k = uniform(rng, 1, 3);
    std::vector<TriggerRef> triggers;

    auto annotate = [&](const ActionSpec& spec, int ready, int trigger, bool triggered) {
      std::map<std::string, std::string> values;
      for (const auto& p : spec.required_params) values[p] = param_value(p, rng);
      const int nreq = static_cast<int>(spec.required_params.size());
      const int first = std::max(1, ready - 2);
      const int last = triggered ? trigger : std::min(n, ready + uniform(rng, 0, 2));
      for (int t = first; t <= last; ++t) {
        TriggerStatus st = TriggerStatus::kPending;
        int provided = std::max(0, nreq - (ready - t) - 1);
        if (t >= ready) {
          st = triggered && t == trigger ? TriggerStatus::kTriggered : TriggerStatus::kReadyToTrigger;
          provided = nreq;
        }
        d.turns[static_cast<std::size_t>(t - 1)].actions.push_back(make_instance(spec, values, st, provided));
      }
    };

    for (int j = 0; j < k; ++j) {
      const ActionSpec& spec = cat.actions[order[static_cast<std::size_t>(j)]];
      const int trigger = uniform(rng, std::min(3, n), n);
      const int ready = std::max(1, trigger - gap_dist(rng));
      triggers.push_back({trigger, spec.name});
      if (chance(rng, opt.missing_annotation_rate)) continue;
      annotate(spec, ready, trigger, true);
    }
    if (chance(rng, opt.phantom_rate) && k < static_cast<int>(order.size())) {
      const ActionSpec& spec = cat.actions[order[static_cast<std::size_t>(k)]];
      annotate(spec, uniform(rng, 1, n), 0, false);
    }
    std::sort(triggers.begin(), triggers.end(),
              [](const TriggerRef& a, const TriggerRef& b) { return std::tie(a.turn, a.action) < std::tie(b.turn, b.action); });
    d.observed_triggers = triggers;
    for (TurnAnnotation& ta : d.turns) {
      std::stable_sort(ta.actions.begin(), ta.actions.end(),
                       [](const ActionInstance& a, const ActionInstance& b) { return a.spec_name < b.spec_name; });
    }
    out.push_back(std::move(d));
  }
  return out;
}

Dialogue strip_annotations(const Dialogue& d) {
  Dialogue s;
  s.id = d.id;
  for (const TurnAnnotation& ta : d.turns) {
    TurnAnnotation t;
    t.turn = ta.turn;
    s.turns.push_back(std::move(t));
  }
  return s;
}

std::string scripted_annotation_response(const Dialogue& annotated, int turn, int attempt, bool flaky) {
  if (flaky && attempt == 1 && turn % 5 == 0) return "I could not produce the JSON this time.";
  const TurnAnnotation& ta = annotated.turns.at(static_cast<std::size_t>(turn - 1));
  json doc{{"dialogue_turn", turn}, {"proactive_annotations", ta.actions}, {"questions", ta.questions}};
  return "```json\n" + doc.dump(2) + "\n```";
}

}  // namespace prosched
