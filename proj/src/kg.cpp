#include "kgalign/kg.hpp"

#include <sstream>

namespace kgalign {

int Vocabulary::add(const std::string& label) {
    auto it = index_.find(label);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(labels_.size());
    labels_.push_back(label);
    index_.emplace(label, id);
    return id;
}

int Vocabulary::id(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw LookupError("unknown label '" + label + "'");
    return it->second;
}

const std::string& Vocabulary::label(int id) const {
    if (id < 0 || id >= size()) throw LookupError("id " + std::to_string(id) + " out of range");
    return labels_[static_cast<size_t>(id)];
}

bool KnowledgeGraph::add(const std::string& head, const std::string& relation, const std::string& tail) {
    const int h = entities.add(head);
    const int r = relations.add(relation);
    const int t = entities.add(tail);
    return add(Triple{h, r, t});
}

bool KnowledgeGraph::add(Triple t) {
    check_ids(t.head, t.relation);
    check_ids(t.tail, t.relation);
    if (t.head >= (1 << 26) || t.tail >= (1 << 26) || t.relation >= (1 << 12))
        throw ContractError("graph exceeds index limits");
    if (!set_.insert(key(t)).second) return false;
    triples_.push_back(t);
    tail_index_[pair_key(t.head, t.relation)].push_back(t.tail);
    head_index_[pair_key(t.tail, t.relation)].push_back(t.head);
    return true;
}

void KnowledgeGraph::check_ids(EntityId e, RelationId r) const {
    if (e < 0 || e >= entities.size()) throw LookupError("entity id " + std::to_string(e) + " out of range");
    if (r < 0 || r >= relations.size()) throw LookupError("relation id " + std::to_string(r) + " out of range");
}

const std::vector<EntityId>& KnowledgeGraph::tails(EntityId head, RelationId relation) const {
    static const std::vector<EntityId> empty;
    check_ids(head, relation);
    auto it = tail_index_.find(pair_key(head, relation));
    return it == tail_index_.end() ? empty : it->second;
}

const std::vector<EntityId>& KnowledgeGraph::heads(EntityId tail, RelationId relation) const {
    static const std::vector<EntityId> empty;
    check_ids(tail, relation);
    auto it = head_index_.find(pair_key(tail, relation));
    return it == head_index_.end() ? empty : it->second;
}

std::string KnowledgeGraph::to_tsv() const {
    std::string out;
    for (const auto& t : triples_) {
        out += entities.label(t.head);
        out += '\t';
        out += relations.label(t.relation);
        out += '\t';
        out += entities.label(t.tail);
        out += '\n';
    }
    return out;
}

KnowledgeGraph load_triples(std::string_view text) {
    KnowledgeGraph kg;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 3)
            throw ParseError("line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                             std::to_string(fields.size()));
        for (const auto& f : fields)
            if (f.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty label");
        kg.add(fields[0], fields[1], fields[2]);
    }
    return kg;
}

KnowledgeGraph load_triples_file(const std::string& path) { return load_triples(read_file(path)); }

void EmbeddingTable::validate() const {
    if (static_cast<size_t>(entity_vectors.rows()) != entity_labels.size())
        throw ContractError("entity row count differs from label count");
    if (static_cast<size_t>(relation_vectors.rows()) != relation_labels.size())
        throw ContractError("relation row count differs from label count");
    if (!entity_vectors.allFinite() || !relation_vectors.allFinite())
        throw ContractError("embedding table contains non-finite values");
}

std::string encode_row(const double* data, int n) {
    std::string out;
    out.reserve(static_cast<size_t>(n) * 24);
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += hexfloat(data[i]);
    }
    return out;
}

void decode_row(std::string_view line, double* out, int n) {
    auto fields = split_ws(line);
    if (static_cast<int>(fields.size()) != n)
        throw FormatError("expected " + std::to_string(n) + " components, got " + std::to_string(fields.size()));
    for (int i = 0; i < n; ++i) out[i] = parse_hexfloat(fields[static_cast<size_t>(i)]);
}

namespace {

// Labels may contain spaces, so a tab separates the label from the components.
void write_rows(std::string& out, const std::vector<std::string>& labels, const Mat& m) {
    for (size_t i = 0; i < labels.size(); ++i) {
        out += labels[i];
        out += '\t';
        out += encode_row(m.row(static_cast<Eigen::Index>(i)).data(), static_cast<int>(m.cols()));
        out += '\n';
    }
}

}  // namespace

std::string save_table(const EmbeddingTable& table) {
    table.validate();
    std::string out = "KGE-TABLE v1 " + std::to_string(table.entity_labels.size()) + " " +
                      std::to_string(table.relation_labels.size()) + " " + std::to_string(table.d_e()) + " " +
                      std::to_string(table.d_r()) + "\n";
    write_rows(out, table.entity_labels, table.entity_vectors);
    write_rows(out, table.relation_labels, table.relation_vectors);
    return out;
}

EmbeddingTable load_table(std::string_view text) {
    std::vector<std::string_view> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    if (lines.empty()) throw FormatError("empty embedding table");
    auto header = split_ws(lines[0]);
    if (header.size() != 6 || header[0] != "KGE-TABLE") throw FormatError("missing KGE-TABLE header");
    if (header[1] != "v1") throw FormatError("unsupported table version " + header[1]);
    long ne, nr, de, dr;
    try {
        ne = std::stol(header[2]);
        nr = std::stol(header[3]);
        de = std::stol(header[4]);
        dr = std::stol(header[5]);
    } catch (const std::exception&) {
        throw FormatError("malformed KGE-TABLE header");
    }
    if (ne < 0 || nr < 0 || de < 1 || dr < 1) throw FormatError("invalid KGE-TABLE dimensions");
    if (lines.size() - 1 != static_cast<size_t>(ne + nr))
        throw FormatError("header declares " + std::to_string(ne + nr) + " rows, file has " +
                          std::to_string(lines.size() - 1));
    EmbeddingTable t;
    t.entity_vectors.resize(ne, de);
    t.relation_vectors.resize(nr, dr);
    for (long i = 0; i < ne + nr; ++i) {
        std::string_view line = lines[static_cast<size_t>(i + 1)];
        const size_t tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0)
            throw FormatError("row " + std::to_string(i + 1) + ": missing label");
        std::string label(line.substr(0, tab));
        try {
            if (i < ne) {
                decode_row(line.substr(tab + 1), t.entity_vectors.row(i).data(), static_cast<int>(de));
                t.entity_labels.push_back(std::move(label));
            } else {
                decode_row(line.substr(tab + 1), t.relation_vectors.row(i - ne).data(), static_cast<int>(dr));
                t.relation_labels.push_back(std::move(label));
            }
        } catch (const FormatError& e) {
            throw FormatError("row " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return t;
}

}  // namespace kgalign
