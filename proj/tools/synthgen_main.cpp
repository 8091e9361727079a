// Generates the bundled synthetic stage tables under data/synthetic.
// Three latent risk axes drive the fields so the downstream indicator
// matrix carries a recoverable block structure: procedure choice and award
// criterion, competition (bids and exclusions), execution (variants and
// deviations). Entirely deterministic for a given seed.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "procrisk/csv.hpp"
#include "procrisk/date.hpp"
#include "procrisk/rng.hpp"
#include "procrisk/special.hpp"

using procrisk::Date;
using procrisk::Rng;
using procrisk::special::logistic;

namespace {

struct Row {
  std::vector<std::string> fields;
};

std::string money(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  for (char& c : s)
    if (c == '.') c = ',';  // continental decimal comma, remapped on ingest
  return s;
}

std::string iso(const Date& d) { return procrisk::format_iso(d); }

Date day_in_year(Rng& rng, int year) {
  long base = Date{year, 1, 1}.to_days();
  long span = Date{year, 12, 31}.to_days() - base;
  return Date::from_days(base + static_cast<long>(rng.uniform_int(span + 1)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generate the bundled synthetic procurement tables"};
  std::string out = "data/synthetic";
  std::uint64_t seed = 20170001;
  int authorities = 260;
  app.add_option("--out", out, "Output directory");
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--authorities", authorities, "Number of contracting authorities");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(out);
  Rng rng(seed);

  using procrisk::csv::Table;
  Table call_t, award_t, variants_t, end_t, economic_t, winners_t;
  call_t.header = {"cig", "cf_amministrazione", "data_pubblicazione", "data_scadenza_offerta",
                   "tipo_scelta_contraente"};
  award_t.header = {"cig", "id_aggiudicazione", "data_aggiudicazione", "criterio_aggiudicazione",
                    "importo_aggiudicazione", "offerte_ricevute", "offerte_ammesse",
                    "offerte_escluse"};
  variants_t.header = {"id_aggiudicazione", "id_variante"};
  end_t.header = {"id_aggiudicazione", "data_fine_prevista", "data_fine_effettiva"};
  economic_t.header = {"id_aggiudicazione", "importo_liquidato"};
  winners_t.header = {"id_aggiudicazione", "codice_fiscale_aggiudicatario"};

  long next_cig = 700001, next_award = 900001, next_variant = 40001;
  for (int a = 0; a < authorities; ++a) {
    char auth[16];
    std::snprintf(auth, sizeof auth, "AUTH%04d", a + 1);
    double proc_risk = rng.normal();   // non-open use, inversely MEAT use
    double comp_risk = rng.normal();   // single bidding and exclusions
    double exec_risk = rng.normal();   // variants and deviations
    // firm pool: high competition risk concentrates awards
    int pool = 2 + static_cast<int>(rng.uniform_int(6));
    double concentration = logistic(0.8 * comp_risk);

    int contracts = (rng.uniform() < 0.04) ? 1 : 2 + static_cast<int>(rng.uniform_int(12));
    for (int t = 0; t < contracts; ++t) {
      char cig[16];
      std::snprintf(cig, sizeof cig, "CIG%07ld", next_cig++);

      int year = 2017;
      double yr = rng.uniform();
      if (yr < 0.03) year = 2016;
      else if (yr < 0.06) year = 2018;
      Date published = day_in_year(rng, year);
      std::string pub = rng.uniform() < 0.02 ? "" : iso(published);

      double advert_days = 12.0 + 40.0 * rng.uniform() + 6.0 * rng.normal();
      std::string deadline;
      Date deadline_date = published;
      if (rng.uniform() < 0.92) {
        long span = std::lround(std::max(-8.0, advert_days));  // rare negative span: data error
        deadline_date = Date::from_days(published.to_days() + span);
        deadline = iso(deadline_date);
      }

      bool non_open = rng.uniform() < logistic(-0.4 + 1.5 * proc_risk);
      std::string tipo = rng.uniform() < 0.05
                             ? ""
                             : (non_open ? "PROCEDURA NEGOZIATA SENZA BANDO" : "PROCEDURA APERTA");
      call_t.rows.push_back({cig, auth, pub, deadline, tipo});
      if (rng.uniform() < 0.01) call_t.rows.push_back({cig, auth, pub, deadline, tipo});

      if (rng.uniform() < 0.12) continue;  // never awarded

      char award_id[16];
      std::snprintf(award_id, sizeof award_id, "ADJ%07ld", next_award++);
      Date award_date = Date::from_days(deadline_date.to_days() + 5 +
                                        static_cast<long>(rng.uniform_int(90)));
      bool meat = rng.uniform() < logistic(-0.2 - 1.4 * proc_risk + 0.3 * rng.normal());
      double value = std::exp(10.0 + 1.2 * rng.normal()) / 100.0;

      long received = 1 + static_cast<long>(rng.uniform() <
                                                    logistic(0.8 + 1.3 * comp_risk)
                                                ? 0
                                                : rng.uniform_int(8));
      long excluded = 0;
      if (received > 1) {
        if (rng.uniform() < logistic(-1.8 + 1.4 * comp_risk)) excluded = received - 1;
        else excluded = static_cast<long>(rng.uniform_int(received));
      }
      long eligible = received - excluded;

      std::string recv = rng.uniform() < 0.06 ? "" : std::to_string(received);
      std::string excl = rng.uniform() < 0.10 ? "" : std::to_string(excluded);
      std::string elig = rng.uniform() < 0.25 ? "" : std::to_string(eligible);
      award_t.rows.push_back({cig, award_id, iso(award_date),
                              meat ? "OFFERTA ECONOMICAMENTE PIU VANTAGGIOSA"
                                   : "MINOR PREZZO",
                              rng.uniform() < 0.04 ? "" : money(value), recv, elig, excl});

      if (rng.uniform() < logistic(-1.4 + 1.5 * exec_risk)) {
        variants_t.rows.push_back({award_id, std::to_string(next_variant++)});
        if (rng.uniform() < 0.15)
          variants_t.rows.push_back({award_id, std::to_string(next_variant++)});
      }

      if (rng.uniform() < 0.78) {
        long expected_days = 30 + static_cast<long>(rng.uniform_int(360));
        double overrun = std::max(-0.7, 0.35 * exec_risk + 0.25 * rng.normal());
        long actual_days = std::lround(expected_days * (1.0 + std::max(-0.95, overrun)));
        end_t.rows.push_back(
            {award_id, iso(Date::from_days(award_date.to_days() + expected_days)),
             iso(Date::from_days(award_date.to_days() + std::max(1L, actual_days)))});
      }

      if (rng.uniform() < 0.80) {
        double drift = std::max(-0.6, 0.30 * exec_risk + 0.20 * rng.normal());
        economic_t.rows.push_back({award_id, money(value * (1.0 + drift))});
      }

      int winner = rng.uniform() < concentration
                       ? 0
                       : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(pool)));
      char firm[24];
      std::snprintf(firm, sizeof firm, "FIRM%04d_%02d", a + 1, winner + 1);
      winners_t.rows.push_back({award_id, firm});
      if (rng.uniform() < 0.06) {  // consortium: second winner on the same award
        std::snprintf(firm, sizeof firm, "FIRM%04d_%02d", a + 1,
                      1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(pool))));
        winners_t.rows.push_back({award_id, firm});
      }
    }
  }
  // a handful of award rows whose cig never appears in the call table
  for (int i = 0; i < 7; ++i) {
    char cig[16], award_id[16];
    std::snprintf(cig, sizeof cig, "CIG%07d", 99990 + i);
    std::snprintf(award_id, sizeof award_id, "ADJ%07d", 99990 + i);
    award_t.rows.push_back({cig, award_id, "2017-06-01", "MINOR PREZZO", money(1000.0), "2", "2",
                            "0"});
  }

  namespace csvns = procrisk::csv;
  csvns::write_file(std::filesystem::path(out) / "bando_cig.csv", call_t, ';');
  csvns::write_file(std::filesystem::path(out) / "aggiudicazioni.csv", award_t, ';');
  csvns::write_file(std::filesystem::path(out) / "varianti.csv", variants_t, ';');
  csvns::write_file(std::filesystem::path(out) / "fine_contratto.csv", end_t, ';');
  csvns::write_file(std::filesystem::path(out) / "quadro_economico.csv", economic_t, ';');
  csvns::write_file(std::filesystem::path(out) / "aggiudicatari.csv", winners_t, ';');

  std::ofstream mapping(std::filesystem::path(out) / "mapping.json");
  mapping << R"({
  "delimiter": ";",
  "date_format": "%Y-%m-%d",
  "decimal_separator": ",",
  "stages": {
    "call": {
      "cig": "cig",
      "authority_id": "cf_amministrazione",
      "publication_date": "data_pubblicazione",
      "submission_deadline": "data_scadenza_offerta",
      "procedure_type": "tipo_scelta_contraente"
    },
    "award": {
      "cig": "cig",
      "award_id": "id_aggiudicazione",
      "award_date": "data_aggiudicazione",
      "award_criterion": "criterio_aggiudicazione",
      "award_value": "importo_aggiudicazione",
      "bids_received": "offerte_ricevute",
      "bids_eligible": "offerte_ammesse",
      "bids_excluded": "offerte_escluse"
    },
    "variants": {"award_id": "id_aggiudicazione"},
    "end": {
      "award_id": "id_aggiudicazione",
      "expected_end_date": "data_fine_prevista",
      "actual_end_date": "data_fine_effettiva"
    },
    "economic": {"award_id": "id_aggiudicazione", "paid_value": "importo_liquidato"},
    "winners": {"award_id": "id_aggiudicazione", "winner_id": "codice_fiscale_aggiudicatario"}
  },
  "value_classes": {
    "procedure_type": {
      "procedura aperta": "open",
      "procedura ristretta": "open",
      "procedura negoziata senza bando": "non_open",
      "affidamento diretto": "non_open"
    },
    "award_criterion": {
      "offerta economicamente piu vantaggiosa": "meat",
      "minor prezzo": "lowest_price"
    }
  }
}
)";
  std::ofstream config(std::filesystem::path(out) / "config.json");
  config << R"({
  "mapping": "mapping.json",
  "tables": {
    "call": "bando_cig.csv",
    "award": "aggiudicazioni.csv",
    "variants": "varianti.csv",
    "end": "fine_contratto.csv",
    "economic": "quadro_economico.csv",
    "winners": "aggiudicatari.csv"
  },
  "reference_year": 2017,
  "categories": 4,
  "alpha": 0.05,
  "dims": {"min": 1, "max": 2},
  "fit": {"gh_nodes_per_dim": 11, "max_em_cycles": 2000},
  "selection": {"threshold_pct": 0.25, "indexes": ["aic", "bic"]},
  "loading_cut": 0.2,
  "seed": 91,
  "threads": 1,
  "out_dir": "out"
}
)";
  std::printf("wrote %zu call rows, %zu award rows under %s\n", call_t.rows.size(),
              award_t.rows.size(), out.c_str());
  return 0;
}
