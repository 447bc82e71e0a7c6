"""Back-end checker for the notepad calculus."""
