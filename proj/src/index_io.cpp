#include "lfqa/index_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "lfqa/embedding.hpp"
#include "lfqa/errors.hpp"

namespace lfqa {

namespace {

constexpr std::string_view k_magic = "LFQAIDX1";

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
  public:
    void u8(std::uint8_t v) { m_buf.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void str(std::string_view s)
    {
        u32(checked(s.size()));
        m_buf.append(s);
    }
    void raw(std::string_view s) { m_buf.append(s); }

    static std::uint32_t checked(std::size_t v)
    {
        if (v > UINT32_MAX) {
            throw InvalidArgument("value too large for the index format");
        }
        return static_cast<std::uint32_t>(v);
    }

    std::string& buffer() { return m_buf; }

  private:
    std::string m_buf;
};

class Reader {
  public:
    explicit Reader(std::string_view data) : m_data(data) {}

    std::uint8_t u8()
    {
        need(1);
        return static_cast<std::uint8_t>(m_data[m_pos++]);
    }
    std::uint32_t u32()
    {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64()
    {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        }
        return v;
    }
    std::string str()
    {
        auto n = u32();
        need(n);
        std::string s(m_data.substr(m_pos, n));
        m_pos += n;
        return s;
    }
    std::string_view raw(std::size_t n)
    {
        need(n);
        auto s = m_data.substr(m_pos, n);
        m_pos += n;
        return s;
    }
    std::size_t position() const noexcept { return m_pos; }

  private:
    void need(std::size_t n) const
    {
        if (m_data.size() - m_pos < n) {
            throw ParseError(0, "index.bin is truncated");
        }
    }

    std::string_view m_data;
    std::size_t m_pos = 0;
};

void write_file(const std::filesystem::path& path, std::string_view bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json metadata_json(const IndexMetadata& m)
{
    nlohmann::json j{{"format", "lfqa-index"},
                     {"version", m.version},
                     {"max_words", m.max_words},
                     {"documents", m.documents},
                     {"passages", m.passages},
                     {"oversized_passages", m.oversized},
                     {"terms", m.terms},
                     {"avg_passage_words", m.avg_length},
                     {"files", {{"index", "index.bin"}}}};
    if (m.embedding_model.empty()) {
        j["embeddings"] = nullptr;
    } else {
        j["embeddings"] = {{"model", m.embedding_model}, {"dim", m.embedding_dim}};
        j["files"]["embeddings"] = "embeddings.jsonl";
    }
    return j;
}

}  // namespace

IndexMetadata write_index(const std::filesystem::path& dir, const Corpus& corpus,
                          std::size_t max_words, EmbeddingProvider* embedder)
{
    auto table = PassageTable::from_corpus(corpus, max_words);
    if (table.empty()) {
        throw InvalidArgument("corpus produced no passages");
    }
    auto index = InvertedIndex::build(table.passages());

    IndexMetadata meta;
    meta.max_words = max_words;
    meta.documents = corpus.documents.size();
    meta.passages = table.size();
    meta.terms = index.posting_map().size();
    meta.avg_length = index.avg_length();
    for (const auto& p : table.passages()) {
        meta.oversized += p.oversized ? 1 : 0;
    }

    Writer w;
    w.raw(k_magic);
    w.u32(k_index_format_version);
    w.u32(Writer::checked(max_words));
    w.u32(Writer::checked(table.size()));
    for (const auto& p : table.passages()) {
        w.str(p.doc_id);
        w.u32(Writer::checked(p.passage_index));
        w.str(p.title);
        w.str(p.text);
        w.u8(p.oversized ? 1 : 0);
    }
    std::vector<const std::string*> terms;
    terms.reserve(index.posting_map().size());
    for (const auto& [term, _] : index.posting_map()) {
        terms.push_back(&term);
    }
    std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
    w.u32(Writer::checked(terms.size()));
    for (const auto* term : terms) {
        auto postings = index.postings(*term);
        w.str(*term);
        w.u32(Writer::checked(postings.size()));
        for (const auto& posting : postings) {
            w.u32(posting.ref.value);
            w.u32(posting.term_frequency);
        }
    }
    w.u64(fnv1a(w.buffer()));

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }

    if (embedder != nullptr) {
        EmbeddingStore store(embedder->dim());
        std::vector<std::string> texts;
        texts.reserve(table.size());
        for (const auto& p : table.passages()) {
            texts.push_back(p.text);
        }
        auto vectors = embedder->embed(texts);
        if (vectors.size() != texts.size()) {
            throw ProtocolError("embedder returned the wrong number of vectors");
        }
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            store.add(PassageRef{static_cast<std::uint32_t>(i)}, vectors[i]);
        }
        std::ofstream out(dir / "embeddings.jsonl", std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + (dir / "embeddings.jsonl").string());
        }
        store.write_jsonl(out, table);
        meta.embedding_model = embedder->name();
        meta.embedding_dim = embedder->dim();
    } else {
        std::filesystem::remove(dir / "embeddings.jsonl", ec);
    }

    write_file(dir / "index.bin", w.buffer());
    write_file(dir / "index.json", metadata_json(meta).dump(2) + "\n");
    return meta;
}

LoadedIndex load_index(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("index directory " + dir.string() + " does not exist");
    }
    auto bytes = read_file(dir / "index.bin");
    if (bytes.size() < k_magic.size() + 4 + 8) {
        throw ParseError(0, "index.bin is truncated");
    }
    std::string_view body(bytes.data(), bytes.size() - 8);
    Reader trailer(std::string_view(bytes).substr(bytes.size() - 8));
    if (trailer.u64() != fnv1a(body)) {
        throw ParseError(0, "index.bin checksum mismatch");
    }

    Reader r(body);
    if (r.raw(k_magic.size()) != k_magic) {
        throw ParseError(0, "index.bin has the wrong magic");
    }
    auto version = r.u32();
    if (version != k_index_format_version) {
        throw ParseError(0, "unsupported index version " + std::to_string(version));
    }

    LoadedIndex out;
    out.meta.version = version;
    out.meta.max_words = r.u32();
    auto n = r.u32();
    std::vector<Passage> passages;
    passages.reserve(n);
    std::set<std::string> docs;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto doc_id = r.str();
        auto passage_index = r.u32();
        auto title = r.str();
        auto text = r.str();
        bool oversized = r.u8() != 0;
        docs.insert(doc_id);
        out.meta.oversized += oversized ? 1 : 0;
        passages.push_back(
            make_passage(std::move(doc_id), std::move(title), passage_index, std::move(text), oversized));
    }
    std::vector<std::uint32_t> lengths;
    lengths.reserve(passages.size());
    for (const auto& p : passages) {
        lengths.push_back(static_cast<std::uint32_t>(p.word_count));
    }

    InvertedIndex::PostingMap postings;
    auto terms = r.u32();
    for (std::uint32_t t = 0; t < terms; ++t) {
        auto term = r.str();
        auto count = r.u32();
        std::vector<Posting> list;
        list.reserve(count);
        for (std::uint32_t j = 0; j < count; ++j) {
            Posting p;
            p.ref.value = r.u32();
            p.term_frequency = r.u32();
            list.push_back(p);
        }
        if (!postings.emplace(std::move(term), std::move(list)).second) {
            throw ParseError(0, "index.bin repeats a term");
        }
    }
    if (r.position() != body.size()) {
        throw ParseError(0, "index.bin has trailing bytes");
    }

    out.table = PassageTable(std::move(passages));
    out.index = InvertedIndex::from_parts(std::move(postings), std::move(lengths));
    out.meta.documents = docs.size();
    out.meta.passages = out.table.size();
    out.meta.terms = terms;
    out.meta.avg_length = out.index.avg_length();

    auto emb_path = dir / "embeddings.jsonl";
    if (std::filesystem::exists(emb_path)) {
        std::ifstream in(emb_path);
        if (!in) {
            throw IoError("cannot open " + emb_path.string());
        }
        out.embeddings = EmbeddingStore::read_jsonl(in, out.table);
        out.meta.embedding_dim = out.embeddings->dim();
        auto sidecar = dir / "index.json";
        if (std::filesystem::exists(sidecar)) {
            try {
                auto j = nlohmann::json::parse(read_file(sidecar));
                if (j.contains("embeddings") && j["embeddings"].is_object()) {
                    out.meta.embedding_model = j["embeddings"].value("model", "");
                }
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(0, std::string("index.json: ") + e.what());
            }
        }
    }
    return out;
}

}  // namespace lfqa
