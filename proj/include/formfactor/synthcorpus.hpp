#pragma once

// Synthetic labeled form documents. A template fixes the layout (column grid,
// block order, key-value placement, distractor blocks) and the key phrases;
// documents rendered from it differ only in their values. Structure draws are
// independent of the language, so en and fr templates from one seed share
// their grid and differ in wording.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "formfactor/candgen.hpp"
#include "formfactor/corpus.hpp"
#include "formfactor/docmodel.hpp"
#include "formfactor/random.hpp"

namespace formfactor {

struct CorpusSpec {
  std::string doc_type = "invoice";  // invoice | paystub
  std::string language = "en";       // en | fr
  std::size_t n_docs = 100;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  std::optional<std::size_t> n_test;  // overrides test_fraction
  double noise = 0.0;                 // per value token drop/corrupt probability

  void validate() const {
    if (doc_type != "invoice" && doc_type != "paystub")
      throw InvariantError("corpus spec: doc_type must be invoice or paystub, got '" + doc_type + "'");
    if (language != "en" && language != "fr")
      throw InvariantError("corpus spec: language must be en or fr, got '" + language + "'");
    if (n_docs < 1) throw InvariantError("corpus spec: n_docs must be >= 1");
    if (!(test_fraction >= 0 && test_fraction < 1)) throw InvariantError("corpus spec: test_fraction must be in [0,1)");
    if (n_test && *n_test > n_docs) throw InvariantError("corpus spec: n_test exceeds n_docs");
    if (!(noise >= 0 && noise <= 1)) throw InvariantError("corpus spec: noise must be in [0,1]");
  }

  std::size_t test_count() const {
    if (n_test) return *n_test;
    return static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n_docs)));
  }
};

inline TargetSchema default_schema(const std::string& doc_type) {
  auto field = [](const char* name, FieldType t) { return FieldSpec{name, t, std::nullopt}; };
  const auto D = FieldType::kDate, A = FieldType::kAmount, X = FieldType::kAlphanumeric, N = FieldType::kNumeric;
  TargetSchema s;
  s.doc_type = doc_type;
  if (doc_type == "invoice") {
    s.fields = {field("invoice_number", X), field("purchase_order", X), field("customer_id", X),
                field("invoice_date", D),   field("due_date", D),       field("delivery_date", D),
                field("subtotal", A),       field("discount", A),       field("tax_amount", A),
                field("freight", A),        field("total_amount", A),   field("amount_due", A)};
    s.constraints = {{Constraint::Kind::kDatePrecedes, "invoice_date", "due_date"}};
  } else if (doc_type == "paystub") {
    s.fields = {field("pay_date", D),        field("period_start", D),     field("period_end", D),
                field("employee_id", X),     field("check_number", X),     field("account_number", X),
                field("gross_pay", A),       field("net_pay", A),          field("federal_tax", A),
                field("state_tax", A),       field("social_security", A),  field("medicare", A),
                field("total_deductions", A), field("ytd_gross", A),       field("ytd_net", A),
                field("ytd_federal_tax", A), field("hourly_rate", A),      field("regular_hours", N),
                field("overtime_hours", N)};
    s.constraints = {{Constraint::Kind::kDatePrecedes, "period_start", "period_end"},
                     {Constraint::Kind::kDatePrecedes, "period_end", "pay_date"}};
  } else {
    throw InvariantError("unknown doc_type '" + doc_type + "'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Lexicons

namespace synth_detail {

using Phrases = std::vector<std::string>;
using Lexicon = std::map<std::string, Phrases>;

inline const Lexicon& key_lexicon(const std::string& doc_type, const std::string& language) {
  static const Lexicon kInvoiceEn = {
      {"invoice_number", {"Invoice Number", "Invoice No.", "Invoice #", "Number", "Reference No."}},
      {"purchase_order", {"PO Number", "P.O. No.", "Purchase Order", "Order Number", "Your Order No."}},
      {"customer_id", {"Customer ID", "Customer No.", "Client ID", "Account No."}},
      {"invoice_date", {"Invoice Date", "Date", "Dated", "Date of Invoice"}},
      {"due_date", {"Due Date", "Payment Due", "Due By", "Pay By"}},
      {"delivery_date", {"Delivery Date", "Ship Date", "Date Shipped", "Delivered On"}},
      {"subtotal", {"Subtotal", "Sub Total", "Net Amount", "Total Before Tax"}},
      {"discount", {"Discount", "Less Discount", "Rebate"}},
      {"tax_amount", {"Tax", "Sales Tax", "VAT", "Tax Amount"}},
      {"freight", {"Freight", "Shipping", "Shipping & Handling", "Delivery Charge"}},
      {"total_amount", {"Total", "Invoice Total", "Total Amount", "Grand Total"}},
      {"amount_due", {"Amount Due", "Balance Due", "Total Due", "Please Pay"}}};
  static const Lexicon kInvoiceFr = {
      {"invoice_number", {"Numéro de facture", "Facture No.", "N° facture", "Référence"}},
      {"purchase_order", {"Bon de commande", "Commande No.", "N° de commande", "Réf. commande"}},
      {"customer_id", {"Code client", "Client No.", "N° client", "Identifiant client"}},
      {"invoice_date", {"Date de facture", "Date", "Facturé le", "Date facture"}},
      {"due_date", {"Date d'échéance", "Échéance", "À payer avant le", "Date limite"}},
      {"delivery_date", {"Date de livraison", "Livré le", "Expédié le", "Livraison"}},
      {"subtotal", {"Sous-total", "Total HT", "Montant HT", "Net HT"}},
      {"discount", {"Remise", "Escompte", "Rabais"}},
      {"tax_amount", {"TVA", "Montant TVA", "Taxes", "Total TVA"}},
      {"freight", {"Frais de port", "Transport", "Frais d'expédition"}},
      {"total_amount", {"Total", "Total TTC", "Montant TTC", "Total facture"}},
      {"amount_due", {"Net à payer", "Montant dû", "Solde dû", "Reste à payer"}}};
  static const Lexicon kPaystubEn = {
      {"pay_date", {"Pay Date", "Payment Date", "Check Date", "Date Paid"}},
      {"period_start", {"Period Start", "Period Beginning", "From", "Start Date"}},
      {"period_end", {"Period End", "Period Ending", "To", "End Date"}},
      {"employee_id", {"Employee ID", "Employee No.", "Emp #", "Staff ID"}},
      {"check_number", {"Check No.", "Check Number", "Advice No.", "Voucher Number"}},
      {"account_number", {"Account Number", "Account No.", "Deposit Account", "Acct #"}},
      {"gross_pay", {"Gross Pay", "Gross Earnings", "Total Earnings", "Gross Amount"}},
      {"net_pay", {"Net Pay", "Net Amount", "Take Home Pay", "Net Check"}},
      {"federal_tax", {"Federal Tax", "Federal Income Tax", "Fed Withholding", "FIT"}},
      {"state_tax", {"State Tax", "State Income Tax", "State Withholding", "SIT"}},
      {"social_security", {"Social Security", "OASDI", "Soc Sec Tax", "FICA SS"}},
      {"medicare", {"Medicare", "Medicare Tax", "FICA Med", "Med Tax"}},
      {"total_deductions", {"Total Deductions", "Deductions", "Total Withheld", "Total Taxes"}},
      {"ytd_gross", {"YTD Gross", "Gross YTD", "Year To Date Gross", "YTD Earnings"}},
      {"ytd_net", {"YTD Net", "Net YTD", "Year To Date Net", "YTD Net Pay"}},
      {"ytd_federal_tax", {"YTD Federal Tax", "Federal Tax YTD", "YTD Fed", "YTD FIT"}},
      {"hourly_rate", {"Rate", "Hourly Rate", "Pay Rate", "Rate Per Hour"}},
      {"regular_hours", {"Regular Hours", "Hours", "Reg Hrs", "Hours Worked"}},
      {"overtime_hours", {"Overtime Hours", "OT Hours", "Overtime", "OT Hrs"}}};
  static const Lexicon kPaystubFr = {
      {"pay_date", {"Date de paiement", "Payé le", "Date de paie"}},
      {"period_start", {"Début de période", "Du", "Période du"}},
      {"period_end", {"Fin de période", "Au", "Jusqu'au"}},
      {"employee_id", {"Matricule", "N° salarié", "Identifiant salarié"}},
      {"check_number", {"N° de chèque", "Chèque No.", "N° bulletin"}},
      {"account_number", {"N° de compte", "Compte", "Compte bancaire"}},
      {"gross_pay", {"Salaire brut", "Brut", "Total brut"}},
      {"net_pay", {"Net à payer", "Salaire net", "Net payé"}},
      {"federal_tax", {"Impôt fédéral", "Prélèvement à la source", "Impôt sur le revenu"}},
      {"state_tax", {"Impôt provincial", "Taxe régionale", "Impôt local"}},
      {"social_security", {"Sécurité sociale", "Cotisation vieillesse", "Retraite de base"}},
      {"medicare", {"Assurance maladie", "Maladie", "Cotisation santé"}},
      {"total_deductions", {"Total retenues", "Retenues", "Total cotisations"}},
      {"ytd_gross", {"Brut cumulé", "Cumul brut", "Brut annuel"}},
      {"ytd_net", {"Net cumulé", "Cumul net", "Net annuel"}},
      {"ytd_federal_tax", {"Impôt cumulé", "Cumul impôt", "Impôt annuel"}},
      {"hourly_rate", {"Taux horaire", "Taux", "Salaire horaire"}},
      {"regular_hours", {"Heures normales", "Heures", "Heures travaillées"}},
      {"overtime_hours", {"Heures supplémentaires", "Heures sup.", "Heures majorées"}}};
  if (doc_type == "invoice") return language == "fr" ? kInvoiceFr : kInvoiceEn;
  return language == "fr" ? kPaystubFr : kPaystubEn;
}

// Words used by distractor blocks, keyed by role.
inline const Lexicon& filler_lexicon(const std::string& language) {
  static const Lexicon kEn = {
      {"title_invoice", {"INVOICE", "Invoice", "TAX INVOICE", "BILL"}},
      {"title_paystub", {"EARNINGS STATEMENT", "Pay Stub", "PAYSLIP", "Statement of Earnings"}},
      {"company", {"Acme", "Globex", "Initech", "Umbrella", "Vandelay", "Hooli", "Soylent", "Cyberdyne", "Wonka", "Stark"}},
      {"company_kind", {"Supply", "Industries", "Logistics", "Services", "Trading", "Manufacturing"}},
      {"company_suffix", {"Inc.", "LLC", "Co.", "Ltd"}},
      {"street", {"Oak", "Maple", "Main", "Pine", "Cedar", "Elm", "Lake", "Hill", "Park", "Washington"}},
      {"street_kind", {"Street", "Ave", "Road", "Blvd", "Drive"}},
      {"city", {"Springfield", "Riverside", "Fairview", "Franklin", "Greenville", "Madison", "Clinton", "Salem"}},
      {"state", {"IL", "CA", "TX", "NY", "OH", "WA", "GA", "PA"}},
      {"person_first", {"John", "Mary", "James", "Linda", "Robert", "Susan", "David", "Karen", "Paul", "Laura"}},
      {"person_last", {"Smith", "Johnson", "Brown", "Miller", "Davis", "Wilson", "Moore", "Taylor", "Clark", "Lewis"}},
      {"bill_to", {"Bill To", "Sold To", "Customer", "Invoice To"}},
      {"ship_to", {"Ship To", "Deliver To", "Shipping Address"}},
      {"phone", {"Tel", "Phone", "Tel."}},
      {"terms", {"Terms Net 30", "Payment Terms Net 30", "Terms Due on receipt", "Net 45 days"}},
      {"thanks", {"Thank you for your business", "We appreciate your business", "Questions? Call us"}},
      {"printed", {"Printed", "Print Date", "Page 1 of 1 Printed"}},
      {"bank", {"Bank Account", "Remit To Account", "Wire To Account"}},
      {"item", {"Widget", "Bolt", "Cable", "Consulting", "Bracket", "Panel", "Filter", "Valve", "Sensor", "Labor", "Support"}},
      {"item_mod", {"Pro", "XL", "Std", "Kit", "Plus", "Mini"}},
      {"table_desc", {"Description", "Item", "Product"}},
      {"table_qty", {"Qty", "Quantity", "Units"}},
      {"table_price", {"Unit Price", "Price", "Rate"}},
      {"table_amount", {"Amount", "Line Total", "Ext. Price"}},
      {"employee", {"Employee", "Pay To", "Employee Name"}},
      {"deposit", {"Direct Deposit", "Deposited To Checking", "Paid By Direct Deposit"}},
      {"hire", {"Hire Date", "Start Of Employment", "Date Hired"}},
      {"frequency", {"Pay Frequency Biweekly", "Biweekly Pay", "Frequency Biweekly"}},
      {"deduction", {"Dental", "Vision", "401(k)", "Life Insurance", "Union Dues", "Health Plan"}},
      {"table_deduction", {"Deduction", "Description", "Other Deductions"}},
      {"table_current", {"Current", "This Period", "Amount"}},
      {"table_ytd", {"YTD", "Year To Date", "YTD Amount"}}};
  static const Lexicon kFr = {
      {"title_invoice", {"FACTURE", "Facture", "FACTURE N°", "Note d'honoraires"}},
      {"title_paystub", {"BULLETIN DE PAIE", "Bulletin de salaire", "Fiche de paie"}},
      {"company", {"Dupont", "Lefèvre", "Moreau", "Garnier", "Rousseau", "Bernard", "Fournier", "Girard", "Mercier", "Blanc"}},
      {"company_kind", {"Fournitures", "Industries", "Logistique", "Services", "Négoce", "Fabrication"}},
      {"company_suffix", {"SARL", "SA", "SAS", "et Fils"}},
      {"street", {"Victor Hugo", "de la Paix", "Pasteur", "Jean Jaurès", "des Lilas", "du Moulin", "de la Gare", "Voltaire"}},
      {"street_kind", {"rue", "avenue", "boulevard", "place", "chemin"}},
      {"city", {"Lyon", "Nantes", "Lille", "Rennes", "Toulouse", "Bordeaux", "Grenoble", "Dijon"}},
      {"state", {"France", "FR", "Cedex"}},
      {"person_first", {"Jean", "Marie", "Pierre", "Sophie", "Luc", "Claire", "Michel", "Isabelle", "Paul", "Anne"}},
      {"person_last", {"Martin", "Durand", "Petit", "Leroy", "Roux", "Fontaine", "Chevalier", "Gauthier", "Perrin", "Robin"}},
      {"bill_to", {"Facturer à", "Client", "Adresse de facturation", "Destinataire"}},
      {"ship_to", {"Livrer à", "Adresse de livraison", "Expédier à"}},
      {"phone", {"Tél", "Tél.", "Téléphone"}},
      {"terms", {"Conditions 30 jours net", "Paiement à 30 jours", "Payable à réception", "Règlement 45 jours"}},
      {"thanks", {"Merci de votre confiance", "Merci pour votre commande", "Questions ? Contactez-nous"}},
      {"printed", {"Imprimé le", "Date d'impression", "Page 1 sur 1 Imprimé le"}},
      {"bank", {"Compte bancaire", "Coordonnées bancaires", "Virement sur compte"}},
      {"item", {"Fourniture", "Câble", "Vis", "Panneau", "Filtre", "Capteur", "Prestation", "Conseil", "Support", "Vanne"}},
      {"item_mod", {"Pro", "XL", "Std", "Kit", "Plus", "Mini"}},
      {"table_desc", {"Désignation", "Description", "Article"}},
      {"table_qty", {"Qté", "Quantité", "Unités"}},
      {"table_price", {"Prix unitaire", "Prix", "PU HT"}},
      {"table_amount", {"Montant", "Total ligne", "Montant HT"}},
      {"employee", {"Salarié", "Employé", "Nom du salarié"}},
      {"deposit", {"Virement bancaire", "Payé par virement", "Versé sur compte"}},
      {"hire", {"Date d'entrée", "Entrée le", "Date d'embauche"}},
      {"frequency", {"Paie mensuelle", "Périodicité mensuelle", "Paie bimensuelle"}},
      {"deduction", {"Mutuelle", "Prévoyance", "Retraite complémentaire", "CSG", "Tickets restaurant", "Transport"}},
      {"table_deduction", {"Retenue", "Libellé", "Autres retenues"}},
      {"table_current", {"Période", "Montant", "Ce mois"}},
      {"table_ytd", {"Cumul", "Cumul annuel", "Depuis janvier"}}};
  return language == "fr" ? kFr : kEn;
}

inline const Phrases& filler(const std::string& language, const std::string& role) {
  return filler_lexicon(language).at(role);
}

inline const std::vector<std::string>& distractor_kinds(const std::string& doc_type) {
  static const std::vector<std::string> kInvoice = {"table", "vendor", "bill_to", "ship_to", "terms", "printed", "bank"};
  static const std::vector<std::string> kPaystub = {"table", "company", "employee", "deposit", "hire", "frequency"};
  return doc_type == "invoice" ? kInvoice : kPaystub;
}

// Alphanumeric identifier patterns per field: prefix options.
inline const std::vector<std::string>& id_prefixes(const std::string& field) {
  static const std::map<std::string, std::vector<std::string>> kPrefixes = {
      {"invoice_number", {"INV-", "IN", "F", "", "INV"}},
      {"purchase_order", {"PO-", "PO", "4500", "", "ORD-"}},
      {"customer_id", {"C", "CUST-", "CL", "", "K-"}},
      {"employee_id", {"E", "EMP-", "", "ID"}},
      {"check_number", {"", "CHK", "DD-", "V"}},
      {"account_number", {"XXXX", "", "ACCT-", "XX-"}}};
  static const std::vector<std::string> kNone = {""};
  auto it = kPrefixes.find(field);
  return it == kPrefixes.end() ? kNone : it->second;
}

inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

// Days since 1970-01-01 for a proleptic Gregorian date and back.
inline long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const long yoe = y - era * 400;
  const long doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

inline std::array<int, 3> civil_from_days(long z) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const long doe = z - era * 146097;
  const long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const long mp = (5 * doy + 2) / 153;
  const int d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  const int m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  return {static_cast<int>(yoe + era * 400 + (m <= 2)), m, d};
}

}  // namespace synth_detail

// ---------------------------------------------------------------------------
// Template

enum class ValuePlacement { kRightOf, kBelow };

struct FieldBlock {
  std::string field;
  FieldType field_type = FieldType::kAlphanumeric;
  std::string key_phrase;
  ValuePlacement placement = ValuePlacement::kRightOf;
  std::string id_prefix;     // alphanumeric fields
  int id_digits = 6;         // alphanumeric fields
};

// A block slot in the column grid: either a field block (index into fields)
// or a distractor block (index into distractors).
struct Slot {
  bool is_field = true;
  std::size_t index = 0;
  std::size_t column = 0;
};

struct DistractorBlock {
  std::string kind;
  std::vector<std::string> labels;  // label phrases drawn from the lexicon
};

struct Template {
  std::string template_id;
  std::string doc_type;
  std::string language;
  std::size_t n_columns = 2;
  bool title_centered = false;
  bool table_on_top = false;
  bool key_colon = false;
  double value_gap = 0.02;      // key-to-value gap for right-of placement
  double line_step = 0.016;
  int date_format = 0;
  int amount_style = 0;
  int hours_decimals = 2;
  std::string title;
  std::vector<FieldBlock> fields;        // schema order
  std::vector<DistractorBlock> distractors;
  std::vector<Slot> slots;               // reading order within columns
};

// Layout and formatting choices that do not depend on the language.
inline json template_structure(const Template& t) {
  json fields = json::array();
  for (const auto& f : t.fields)
    fields.push_back({{"field", f.field},
                      {"placement", f.placement == ValuePlacement::kRightOf ? "right" : "below"},
                      {"id_prefix", f.id_prefix},
                      {"id_digits", f.id_digits}});
  json slots = json::array();
  for (const auto& s : t.slots) slots.push_back({s.is_field, s.index, s.column});
  json kinds = json::array();
  for (const auto& d : t.distractors) kinds.push_back(d.kind);
  return {{"doc_type", t.doc_type},       {"n_columns", t.n_columns},   {"title_centered", t.title_centered},
          {"table_on_top", t.table_on_top}, {"key_colon", t.key_colon}, {"value_gap", t.value_gap},
          {"line_step", t.line_step},     {"hours_decimals", t.hours_decimals}, {"fields", fields},
          {"slots", slots},               {"distractors", kinds}};
}

inline json template_lexicon(const Template& t) {
  json keys = json::array();
  for (const auto& f : t.fields) keys.push_back(f.key_phrase);
  json labels = json::array();
  for (const auto& d : t.distractors) labels.push_back(d.labels);
  return {{"language", t.language}, {"title", t.title},     {"keys", keys},
          {"labels", labels},       {"date_format", t.date_format}, {"amount_style", t.amount_style}};
}

inline std::string compute_template_id(const Template& t) {
  const std::uint64_t h = fnv1a(template_structure(t).dump() + "\x1f" + template_lexicon(t).dump());
  char buf[24];
  std::snprintf(buf, sizeof buf, "tpl-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline Template generate_template(const CorpusSpec& spec, std::uint64_t template_seed) {
  spec.validate();
  using namespace synth_detail;
  const TargetSchema schema = default_schema(spec.doc_type);
  Rng structure(derive_seed(template_seed, "structure", fnv1a(spec.doc_type)));
  Rng lexicon(derive_seed(template_seed, "lexicon", fnv1a(spec.doc_type + "/" + spec.language)));
  const bool paystub = spec.doc_type == "paystub";

  Template t;
  t.doc_type = spec.doc_type;
  t.language = spec.language;
  t.n_columns = paystub ? 3 : static_cast<std::size_t>(structure.range(2, 3));
  t.title_centered = structure.bernoulli(0.5);
  t.table_on_top = structure.bernoulli(0.5);
  t.key_colon = structure.bernoulli(0.5);
  t.value_gap = 0.01 + 0.005 * structure.range(0, 4);
  t.line_step = paystub ? 0.0145 : 0.016;
  t.hours_decimals = structure.range(1, 2);

  for (const auto& f : schema.fields) {
    FieldBlock b;
    b.field = f.name;
    b.field_type = f.field_type;
    b.placement = structure.bernoulli(0.5) ? ValuePlacement::kRightOf : ValuePlacement::kBelow;
    const auto& prefixes = id_prefixes(f.name);
    b.id_prefix = prefixes[structure.index(prefixes.size())];
    b.id_digits = structure.range(5, 8);
    t.fields.push_back(std::move(b));
  }

  // At least two distractor blocks, the line table included with probability 0.8.
  const auto& kinds = distractor_kinds(spec.doc_type);
  std::vector<std::string> pool(kinds.begin() + 1, kinds.end());
  structure.shuffle(pool);
  const bool with_table = structure.bernoulli(0.8);
  const std::size_t n_small = static_cast<std::size_t>(structure.range(with_table ? 1 : 2, static_cast<int>(pool.size())));
  if (with_table) t.distractors.push_back({"table", {}});
  for (std::size_t i = 0; i < n_small; ++i) t.distractors.push_back({pool[i], {}});

  // Grid slots: fields and small distractors shuffled, then dealt to columns.
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < t.fields.size(); ++i) slots.push_back({true, i, 0});
  for (std::size_t i = 0; i < t.distractors.size(); ++i)
    if (t.distractors[i].kind != "table") slots.push_back({false, i, 0});
  structure.shuffle(slots);
  const std::size_t per_col = (slots.size() + t.n_columns - 1) / t.n_columns;
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i].column = i / per_col;
  t.slots = std::move(slots);

  // Wording.
  const auto& keys = key_lexicon(spec.doc_type, spec.language);
  for (auto& b : t.fields) {
    const auto& options = keys.at(b.field);
    b.key_phrase = options[lexicon.index(options.size())];
  }
  t.title = lexicon.pick(filler(spec.language, paystub ? "title_paystub" : "title_invoice"));
  t.date_format = static_cast<int>(lexicon.index(5));
  t.amount_style = static_cast<int>(lexicon.index(3));
  for (auto& d : t.distractors) {
    const std::string& k = d.kind;
    auto pick = [&](const char* role) { d.labels.push_back(lexicon.pick(filler(spec.language, role))); };
    if (k == "table" && !paystub) {
      for (const char* r : {"table_desc", "table_qty", "table_price", "table_amount"}) pick(r);
    } else if (k == "table") {
      for (const char* r : {"table_deduction", "table_current", "table_ytd"}) pick(r);
    } else if (k == "vendor" || k == "company") {
      pick("phone");
    } else if (k == "bill_to") {
      pick("bill_to");
    } else if (k == "ship_to") {
      pick("ship_to");
    } else if (k == "terms") {
      pick("terms");
      pick("thanks");
    } else if (k == "printed") {
      pick("printed");
    } else if (k == "bank") {
      pick("bank");
    } else if (k == "employee") {
      pick("employee");
    } else if (k == "deposit") {
      pick("deposit");
      pick("bank");
    } else if (k == "hire") {
      pick("hire");
    } else if (k == "frequency") {
      pick("frequency");
    }
  }
  t.template_id = compute_template_id(t);
  return t;
}

// ---------------------------------------------------------------------------
// Value formatting

namespace synth_detail {

inline std::string format_date(long days, int fmt, const std::string& language) {
  static const char* kEnMonths[] = {"January", "February", "March",     "April",   "May",      "June",
                                    "July",    "August",   "September", "October", "November", "December"};
  static const char* kEnShort[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  static const char* kFrMonths[] = {"janvier", "février", "mars",      "avril",   "mai",      "juin",
                                    "juillet", "août",    "septembre", "octobre", "novembre", "décembre"};
  const auto [y, m, d] = civil_from_days(days);
  char buf[64];
  if (language == "fr") {
    switch (fmt) {
      case 0: std::snprintf(buf, sizeof buf, "%02d/%02d/%04d", d, m, y); break;
      case 1: std::snprintf(buf, sizeof buf, "%d%s %s %04d", d, d == 1 ? "er" : "", kFrMonths[m - 1], y); break;
      case 2: std::snprintf(buf, sizeof buf, "%02d.%02d.%04d", d, m, y); break;
      case 3: std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d); break;
      default: std::snprintf(buf, sizeof buf, "%02d/%02d/%02d", d, m, y % 100); break;
    }
  } else {
    switch (fmt) {
      case 0: std::snprintf(buf, sizeof buf, "%02d/%02d/%04d", m, d, y); break;
      case 1: std::snprintf(buf, sizeof buf, "%s %d, %04d", kEnMonths[m - 1], d, y); break;
      case 2: std::snprintf(buf, sizeof buf, "%s %d, %04d", kEnShort[m - 1], d, y); break;
      case 3: std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d); break;
      default: std::snprintf(buf, sizeof buf, "%02d/%02d/%02d", m, d, y % 100); break;
    }
  }
  return buf;
}

inline std::string iso_date(long days) {
  const auto [y, m, d] = civil_from_days(days);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

inline std::string canonical_amount(long long cents) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", cents / 100, cents % 100);
  return buf;
}

// Locale grouping: en "12,345.67", fr "12 345,67" (group separator is a space,
// so large fr amounts render as several tokens).
inline std::string format_amount(long long cents, int style, const std::string& language) {
  const std::string digits = std::to_string(cents / 100);
  std::string grouped;
  const char sep = language == "fr" ? ' ' : ',';
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) grouped.push_back(sep);
    grouped.push_back(digits[i]);
  }
  char frac[8];
  std::snprintf(frac, sizeof frac, "%02lld", cents % 100);
  std::string body = grouped + (language == "fr" ? "," : ".") + frac;
  if (language == "fr") {
    if (style == 1) return body + " €";
    if (style == 2) return body + " EUR";
    return body;
  }
  if (style == 1) return "$ " + body;
  if (style == 2) return "$" + body;
  return body;
}

inline std::string format_hours(int halves, int decimals) {
  char buf[32];
  if (decimals == 1)
    std::snprintf(buf, sizeof buf, "%d.%d", halves / 2, halves % 2 ? 5 : 0);
  else
    std::snprintf(buf, sizeof buf, "%d.%s", halves / 2, halves % 2 ? "50" : "00");
  return buf;
}

inline std::string canonical_hours(int halves) { return std::to_string(halves / 2) + (halves % 2 ? ".5" : ""); }

inline std::string random_digits(Rng& rng, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + rng.index(10)));
  return s;
}

inline std::vector<std::string> words_of(const std::string& s) { return text::split_words(s); }

// ---------------------------------------------------------------------------
// Page geometry

struct Canvas {
  std::vector<Token> tokens;
  double char_width = 0.0065;
  double token_height = 0.011;

  double width_of(const std::string& word) const { return char_width * static_cast<double>(utf8_length(word)); }

  double phrase_width(const std::vector<std::string>& words) const {
    double w = 0;
    for (std::size_t i = 0; i < words.size(); ++i) w += width_of(words[i]) + (i ? char_width : 0);
    return w;
  }

  // Places words left to right from (x, y); returns the right edge.
  double put(const std::vector<std::string>& words, double x, double y) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) x += char_width;
      const double w = width_of(words[i]);
      tokens.push_back({words[i], {x, y, x + w, y + token_height}, 0});
      x += w;
    }
    return x;
  }
};

}  // namespace synth_detail

// Values of one rendered document.
struct DocumentValues {
  std::map<std::string, std::string> rendered;   // field -> surface text
  std::map<std::string, std::string> canonical;  // field -> ground truth
};

namespace synth_detail {

inline DocumentValues sample_values(const Template& t, Rng& rng, std::vector<long long>& line_amounts,
                                    std::vector<int>& line_qty, std::vector<long long>& line_price) {
  DocumentValues v;
  auto set_date = [&](const std::string& f, long days) {
    v.rendered[f] = format_date(days, t.date_format, t.language);
    v.canonical[f] = iso_date(days);
  };
  auto set_amount = [&](const std::string& f, long long cents) {
    v.rendered[f] = format_amount(cents, t.amount_style, t.language);
    v.canonical[f] = canonical_amount(cents);
  };
  for (const auto& b : t.fields) {
    if (b.field_type != FieldType::kAlphanumeric) continue;
    const std::string id = b.id_prefix + random_digits(rng, b.id_digits);
    v.rendered[b.field] = id;
    v.canonical[b.field] = text::upper_ascii(id);
  }
  const long base = days_from_civil(2019, 1, 1) + static_cast<long>(rng.index(5 * 365));
  line_amounts.clear();
  line_qty.clear();
  line_price.clear();
  if (t.doc_type == "invoice") {
    set_date("invoice_date", base);
    static const int kTerms[] = {15, 30, 45, 60};
    set_date("due_date", base + kTerms[rng.index(4)]);
    long delivery = base + rng.range(-14, 13);
    if (delivery >= base) ++delivery;
    set_date("delivery_date", delivery);
    const int rows = rng.range(2, 5);
    long long subtotal = 0;
    for (int r = 0; r < rows; ++r) {
      const int qty = rng.range(1, 20);
      const long long price = rng.range(500, 50000);
      line_qty.push_back(qty);
      line_price.push_back(price);
      line_amounts.push_back(qty * price);
      subtotal += qty * price;
    }
    const long long discount = std::max<long long>(100, subtotal * rng.range(1, 10) / 100);
    const int tax_pct = t.language == "fr" ? std::array<int, 3>{20, 10, 5}[rng.index(3)] : rng.range(5, 10);
    const long long tax = (subtotal - discount) * tax_pct / 100;
    const long long freight = rng.range(500, 15000);
    const long long total = subtotal - discount + tax + freight;
    const long long paid = total * rng.range(10, 50) / 100;
    set_amount("subtotal", subtotal);
    set_amount("discount", discount);
    set_amount("tax_amount", tax);
    set_amount("freight", freight);
    set_amount("total_amount", total);
    set_amount("amount_due", total - paid);
  } else {
    const long start = base;
    const long end = start + 13;
    set_date("period_start", start);
    set_date("period_end", end);
    set_date("pay_date", end + rng.range(1, 7));
    const int reg = rng.range(120, 176);  // half hours
    const int ot = rng.range(1, 31);
    v.rendered["regular_hours"] = format_hours(reg, t.hours_decimals);
    v.canonical["regular_hours"] = canonical_hours(reg);
    v.rendered["overtime_hours"] = format_hours(ot, t.hours_decimals);
    v.canonical["overtime_hours"] = canonical_hours(ot);
    const long long rate = rng.range(1500, 6500);
    const long long gross = reg * rate / 2 + ot * rate * 3 / 4;
    const long long fed = gross * rng.range(8, 18) / 100;
    const long long state = gross * rng.range(2, 7) / 100;
    const long long ss = gross * 62 / 1000;
    const long long med = gross * 145 / 10000;
    const int rows = rng.range(2, 4);
    long long other = 0;
    const int periods = rng.range(2, 24);
    for (int r = 0; r < rows; ++r) {
      const long long amt = rng.range(500, 20000);
      line_amounts.push_back(amt);
      line_price.push_back(amt * periods);
      other += amt;
    }
    const long long total_ded = fed + state + ss + med + other;
    const long long net = gross - total_ded;
    set_amount("hourly_rate", rate);
    set_amount("gross_pay", gross);
    set_amount("federal_tax", fed);
    set_amount("state_tax", state);
    set_amount("social_security", ss);
    set_amount("medicare", med);
    set_amount("total_deductions", total_ded);
    set_amount("net_pay", net);
    set_amount("ytd_gross", gross * periods + rng.range(0, 50000));
    set_amount("ytd_net", net * periods + rng.range(0, 30000));
    set_amount("ytd_federal_tax", fed * periods + rng.range(0, 10000));
  }
  return v;
}

}  // namespace synth_detail

// Renders one labeled document from a template. Throws DataError
// ("layout-overflow") when the blocks do not fit the page and DataError
// ("ambiguous-values") when no unambiguous value draw is found.
inline Document render_document(const Template& t, std::uint64_t value_seed, const std::string& doc_id,
                                double noise = 0.0) {
  using namespace synth_detail;
  Rng rng(derive_seed(value_seed, "values"));
  const auto& L = t.language;
  const bool paystub = t.doc_type == "paystub";
  const TargetSchema schema = default_schema(t.doc_type);

  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<long long> line_amounts, line_price;
    std::vector<int> line_qty;
    DocumentValues values = sample_values(t, rng, line_amounts, line_qty, line_price);

    Canvas c;
    if (paystub) c.char_width = 0.006;
    const double margin = 0.05, col_gap = 0.03;
    const double col_w = (1.0 - 2 * margin - col_gap * static_cast<double>(t.n_columns - 1)) / static_cast<double>(t.n_columns);
    std::map<std::string, std::pair<std::size_t, std::size_t>> value_range;  // field -> token range
    bool overflow = false;

    // Title.
    {
      auto w = words_of(t.title);
      const double x = t.title_centered ? 0.5 - c.phrase_width(w) / 2 : margin;
      c.put(w, x, 0.035);
    }
    double y = 0.075;

    auto random_word = [&](const char* role) { return rng.pick(filler(L, role)); };
    auto amount_text = [&](long long cents) { return format_amount(cents, t.amount_style, L); };
    auto date_text = [&](long days) { return format_date(days, t.date_format, L); };

    auto render_table = [&](const DistractorBlock& d) {
      const auto& lab = d.labels;
      std::vector<double> xs;
      if (!paystub)
        xs = {margin, 0.55, 0.68, 0.82};
      else
        xs = {margin, 0.55, 0.75};
      for (std::size_t k = 0; k < lab.size(); ++k) c.put(words_of(lab[k]), xs[k], y);
      y += t.line_step;
      for (std::size_t r = 0; r < line_amounts.size(); ++r) {
        if (!paystub) {
          std::string desc = random_word("item") + " " + random_word("item_mod");
          c.put(words_of(desc), xs[0], y);
          c.put({std::to_string(line_qty[r])}, xs[1], y);
          c.put(words_of(amount_text(line_price[r])), xs[2], y);
          c.put(words_of(amount_text(line_amounts[r])), xs[3], y);
        } else {
          c.put(words_of(filler(L, "deduction")[r % filler(L, "deduction").size()]), xs[0], y);
          c.put(words_of(amount_text(line_amounts[r])), xs[1], y);
          c.put(words_of(amount_text(line_price[r])), xs[2], y);
        }
        y += t.line_step;
      }
      y += 0.02;
    };

    const DistractorBlock* table = nullptr;
    for (const auto& d : t.distractors)
      if (d.kind == "table") table = &d;
    if (table && t.table_on_top) render_table(*table);

    // Column grid.
    const double grid_top = y;
    double grid_bottom = y;
    std::vector<double> col_y(t.n_columns, grid_top);
    for (const auto& s : t.slots) {
      const double x0 = margin + static_cast<double>(s.column) * (col_w + col_gap);
      double& cy = col_y[s.column];
      std::vector<std::vector<std::string>> lines;
      if (s.is_field) {
        const FieldBlock& b = t.fields[s.index];
        auto key = words_of(b.key_phrase);
        if (t.key_colon) key.back() += ":";
        auto val = words_of(values.rendered.at(b.field));
        double right;
        std::size_t begin;
        if (b.placement == ValuePlacement::kRightOf) {
          const double kx = c.put(key, x0, cy);
          begin = c.tokens.size();
          right = c.put(val, kx + t.value_gap, cy);
          cy += t.line_step;
        } else {
          right = c.put(key, x0, cy);
          cy += t.line_step;
          begin = c.tokens.size();
          right = std::max(right, c.put(val, x0, cy));
          cy += t.line_step;
        }
        value_range[b.field] = {begin, c.tokens.size()};
        if (right > x0 + col_w) overflow = true;
      } else {
        const DistractorBlock& d = t.distractors[s.index];
        const std::string& k = d.kind;
        auto company = [&] {
          return random_word("company") + " " + random_word("company_kind") + " " + random_word("company_suffix");
        };
        auto person = [&] { return random_word("person_first") + " " + random_word("person_last"); };
        auto street = [&] {
          const std::string num = std::to_string(rng.range(1, 9999));
          return L == "fr" ? num + " " + random_word("street_kind") + " " + random_word("street")
                           : num + " " + random_word("street") + " " + random_word("street_kind");
        };
        auto city = [&] {
          const std::string zip = random_digits(rng, 5);
          return L == "fr" ? zip + " " + random_word("city") : random_word("city") + ", " + random_word("state") + " " + zip;
        };
        auto phone = [&] {
          return L == "fr" ? "0" + std::to_string(rng.range(1, 5)) + " " + random_digits(rng, 2) + " " +
                                 random_digits(rng, 2) + " " + random_digits(rng, 2) + " " + random_digits(rng, 2)
                           : "(" + random_digits(rng, 3) + ") " + random_digits(rng, 3) + "-" + random_digits(rng, 4);
        };
        const long ref_day = days_from_civil(2019, 1, 1) + static_cast<long>(rng.index(5 * 365));
        if (k == "vendor" || k == "company") {
          lines = {words_of(company()), words_of(street()), words_of(city()), words_of(d.labels[0] + " " + phone())};
        } else if (k == "bill_to" || k == "ship_to" || k == "employee") {
          lines = {words_of(d.labels[0]), words_of(person()), words_of(street()), words_of(city())};
        } else if (k == "terms") {
          lines = {words_of(d.labels[0]), words_of(d.labels[1])};
        } else if (k == "printed" || k == "hire") {
          auto l = words_of(d.labels[0]);
          for (auto& w : words_of(date_text(ref_day))) l.push_back(w);
          lines = {l};
        } else if (k == "bank") {
          lines = {words_of(d.labels[0]), words_of(random_digits(rng, 4) + " " + random_digits(rng, 4) + " " + random_digits(rng, 4))};
        } else if (k == "deposit") {
          lines = {words_of(d.labels[0]), words_of(d.labels[1] + " ****" + random_digits(rng, 4))};
        } else if (k == "frequency") {
          lines = {words_of(d.labels[0])};
        }
        for (const auto& l : lines) {
          if (c.put(l, x0, cy) > x0 + col_w) overflow = true;
          cy += t.line_step;
        }
      }
      cy += paystub ? 0.012 : 0.018;
      grid_bottom = std::max(grid_bottom, cy);
    }
    y = grid_bottom + 0.01;
    if (table && !t.table_on_top) render_table(*table);
    for (const auto& tok : c.tokens)
      if (tok.bbox.x_max > 1.0 - 0.01 || tok.bbox.y_max > 1.0 - 0.01) overflow = true;
    if (overflow) throw DataError("layout-overflow", "template " + t.template_id + " does not fit the page");

    Document doc;
    doc.doc_id = doc_id;
    doc.language = t.language;
    doc.doc_type = t.doc_type;
    doc.template_id = t.template_id;
    doc.pages = {L == "fr" ? PageSize{595, 842} : PageSize{612, 792}};
    GroundTruth gt;
    for (const auto& b : t.fields) {
      const auto [begin, end] = value_range.at(b.field);
      BBox box = c.tokens[begin].bbox;
      for (std::size_t i = begin + 1; i < end; ++i) box = box.united(c.tokens[i].bbox);
      gt[b.field] = {GroundTruthValue{values.canonical.at(b.field), box}};
    }
    doc.ground_truth = std::move(gt);
    doc.tokens = c.tokens;
    sort_reading_order(doc.tokens);

    // Each value must be proposed by exactly one candidate of its type, so labels are unambiguous.
    bool ambiguous = false;
    const auto cands = generate_all_candidates(doc, schema);
    for (const auto& f : schema.fields) {
      std::size_t hits = 0;
      for (const auto& cand : cands.at(f.field_type)) hits += cand.canonical_value == values.canonical.at(f.name);
      if (hits != 1) {
        ambiguous = true;
        break;
      }
    }
    if (ambiguous) continue;

    if (noise > 0) {
      // Value tokens are dropped or have their first digit replaced by a letter.
      std::set<std::size_t> value_token_ids;
      for (const auto& [f, r] : value_range)
        for (std::size_t i = r.first; i < r.second; ++i) value_token_ids.insert(i);
      Rng noise_rng(derive_seed(value_seed, "noise"));
      std::vector<Token> kept;
      for (std::size_t i = 0; i < c.tokens.size(); ++i) {
        Token tok = c.tokens[i];
        if (value_token_ids.count(i) && noise_rng.bernoulli(noise)) {
          if (noise_rng.bernoulli(0.5)) continue;
          auto pos = tok.text.find_first_of("0123456789");
          if (pos != std::string::npos) tok.text[pos] = 'O';
          else tok.text += "x";
        }
        kept.push_back(std::move(tok));
      }
      doc.tokens = std::move(kept);
      sort_reading_order(doc.tokens);
    }
    return doc;
  }
  throw DataError("ambiguous-values", "no unambiguous value draw for template " + t.template_id);
}

// One template per document, all template ids distinct; the last test_count()
// documents form the test split, so their templates never occur in train.
inline Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  Corpus corpus;
  corpus.name = spec.doc_type + "-" + spec.language;
  corpus.language = spec.language;
  corpus.schema = default_schema(spec.doc_type);
  const std::size_t n_test = spec.test_count();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < spec.n_docs; ++i) {
    char id[64];
    std::snprintf(id, sizeof id, "%s-%s-%05zu", spec.doc_type.c_str(), spec.language.c_str(), i);
    std::optional<Document> doc;
    for (std::uint64_t attempt = 0; !doc; ++attempt) {
      if (attempt > 1000) throw InvariantError("generate_corpus: cannot find a fitting template");
      const std::uint64_t tseed = derive_seed(spec.seed, "template", (static_cast<std::uint64_t>(i) << 16) | attempt);
      Template t = generate_template(spec, tseed);
      if (seen.count(t.template_id)) continue;
      try {
        doc = render_document(t, derive_seed(tseed, "document"), id, spec.noise);
      } catch (const DataError& e) {
        if (e.kind() != "layout-overflow" && e.kind() != "ambiguous-values") throw;
        continue;
      }
      seen.insert(t.template_id);
    }
    (i + n_test < spec.n_docs ? corpus.train : corpus.test).push_back(std::move(*doc));
  }
  return corpus;
}

}  // namespace formfactor
