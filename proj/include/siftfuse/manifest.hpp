#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "error.hpp"

namespace siftfuse {

enum class Role { gallery, probe, training };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::gallery: return "gallery";
        case Role::probe: return "probe";
        case Role::training: return "training";
    }
    return "?";
}

struct ImageEntry {
    std::string relative_path;           // as written in the manifest
    std::filesystem::path resolved_path; // manifest directory / relative_path
    Role role;
};

struct SubjectRecord {
    std::string subject_id;
    std::vector<ImageEntry> entries;
};

// Gallery/probe/training split of a face dataset. Format: one image per
// line, `subject_id <TAB> role <TAB> relative_path`, paths relative to the
// manifest's directory. Blank lines and '#' comments are ignored.
struct DatasetManifest {
    std::vector<SubjectRecord> subjects;

    std::vector<const ImageEntry*> entries_with_role(Role role) const {
        std::vector<const ImageEntry*> out;
        for (const auto& s : subjects)
            for (const auto& e : s.entries)
                if (e.role == role) out.push_back(&e);
        return out;
    }

    const SubjectRecord* find_subject(const std::string& id) const {
        for (const auto& s : subjects)
            if (s.subject_id == id) return &s;
        return nullptr;
    }

    const std::string& subject_of(const ImageEntry& e) const {
        for (const auto& s : subjects)
            for (const auto& x : s.entries)
                if (&x == &e) return s.subject_id;
        throw Error("entry does not belong to this manifest");
    }
};

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open manifest: " + path.string());

    const std::filesystem::path base = path.has_parent_path()
                                           ? path.parent_path()
                                           : std::filesystem::path(".");

    DatasetManifest manifest;
    std::map<std::string, std::size_t> subject_index;
    std::set<std::pair<std::string, std::string>> seen_role_path;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos
                                                    : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos)
            throw ParseError("manifest: expected `subject<TAB>role<TAB>path`", lineno);

        const std::string subject = line.substr(0, tab1);
        const std::string role_str = line.substr(tab1 + 1, tab2 - tab1 - 1);
        const std::string rel = line.substr(tab2 + 1);
        if (subject.empty() || rel.empty())
            throw ParseError("manifest: empty subject or path field", lineno);

        Role role;
        if (role_str == "gallery") role = Role::gallery;
        else if (role_str == "probe") role = Role::probe;
        else if (role_str == "training") role = Role::training;
        else throw ParseError("manifest: unknown role '" + role_str + "'", lineno);

        // (role, path) may appear once in the whole file; the same image can
        // carry several roles but never under two subjects or twice.
        if (!seen_role_path.insert({role_str, rel}).second)
            throw DuplicateSubject("manifest: duplicate entry for " + rel +
                                   " with role " + role_str);

        ImageEntry entry{rel, base / rel, role};
        if (!std::filesystem::exists(entry.resolved_path))
            throw MissingFile("manifest: referenced file does not exist: " +
                              entry.resolved_path.string());

        auto [it, inserted] = subject_index.try_emplace(subject, manifest.subjects.size());
        if (inserted)
            manifest.subjects.push_back(SubjectRecord{subject, {}});
        manifest.subjects[it->second].entries.push_back(std::move(entry));
    }

    // an image path must not be claimed by two subjects
    std::map<std::string, std::string> owner;
    for (const auto& s : manifest.subjects)
        for (const auto& e : s.entries) {
            auto [it, inserted] = owner.try_emplace(e.relative_path, s.subject_id);
            if (!inserted && it->second != s.subject_id)
                throw DuplicateSubject("manifest: " + e.relative_path +
                                       " listed under subjects " + it->second +
                                       " and " + s.subject_id);
        }

    return manifest;
}

} // namespace siftfuse
