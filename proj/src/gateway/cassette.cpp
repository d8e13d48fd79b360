#include "gateway/backends.hpp"

#include <fstream>

namespace plotpath::gateway {

using nlohmann::json;

Cassette Cassette::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::storage_unavailable, "cannot open cassette " + path.string());
    }
    Cassette cassette;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            CassetteEntry entry;
            entry.fingerprint = j.at("fingerprint").get<std::string>();
            entry.role = parse_role_tag(j.at("role_tag").get<std::string>());
            entry.response_text = j.at("response_text").get<std::string>();
            if (j.contains("usage")) {
                entry.usage.prompt_tokens = j.at("usage").value("prompt_tokens", 0);
                entry.usage.completion_tokens = j.at("usage").value("completion_tokens", 0);
            }
            cassette.add(std::move(entry));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::corrupt_record,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cassette;
}

const CassetteEntry* Cassette::find(const std::string& fp) const
{
    const auto it = index_.find(fp);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

bool Cassette::add(CassetteEntry entry)
{
    if (index_.contains(entry.fingerprint)) {
        return false;
    }
    index_.emplace(entry.fingerprint, entries_.size());
    entries_.push_back(std::move(entry));
    return true;
}

std::string Cassette::to_line(const CassetteEntry& e)
{
    const json j{{"fingerprint", e.fingerprint},
                 {"role_tag", std::string(to_string(e.role))},
                 {"response_text", e.response_text},
                 {"usage", {{"prompt_tokens", e.usage.prompt_tokens}, {"completion_tokens", e.usage.completion_tokens}}}};
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner, std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path))
{
    if (std::filesystem::exists(path_)) {
        cassette_ = Cassette::load(path_);
    } else {
        std::ofstream touch(path_, std::ios::app);
        if (!touch) {
            throw Error(ErrorCode::storage_unavailable, "cannot create cassette " + path_.string());
        }
    }
}

ChatResponse RecordingBackend::send(const ChatRequest& request)
{
    auto response = inner_->send(request);
    CassetteEntry entry{fingerprint(request), request.role, response.text, response.usage};
    std::lock_guard lock(mutex_);
    const auto line = Cassette::to_line(entry);
    if (cassette_.add(std::move(entry))) {
        std::ofstream out(path_, std::ios::app);
        out << line << '\n';
        if (!out) {
            throw Error(ErrorCode::storage_unavailable, "cannot append to cassette " + path_.string());
        }
    }
    return response;
}

ChatResponse ReplayBackend::send(const ChatRequest& request)
{
    const auto fp = fingerprint(request);
    const auto* entry = cassette_.find(fp);
    if (!entry) {
        throw Error(ErrorCode::cassette_miss, "cassette has no entry for " + std::string(to_string(request.role)) +
                                                  " request " + fp.substr(0, 16));
    }
    ChatResponse response;
    response.text = entry->response_text;
    response.usage = entry->usage;
    return response;
}

} // namespace plotpath::gateway
